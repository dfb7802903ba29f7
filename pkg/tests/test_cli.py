import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from digcl import TrainConfig, load_path_set, load_trace, read_edge_list
from digcl.cli import cli_main, load_config


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data"
    assert cli_main(["sbm", "--n", "30", "--p-fwd", "0.4", "--p-back", "0.05",
                     "--p-cross", "0.05", "--seed", "3", "--out", str(out)]) == 0
    return out


@pytest.fixture
def tiny_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "epochs = 4\n"
        "d_emb = 8\n"
        "mlp_hidden = 12\n"
        "walk_length = 3\n"
        "seed = 5\n"
    )
    return cfg


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class TestUsage:
    def test_unknown_flag_exits_1(self, capsys):
        assert cli_main(["entropy", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_subcommand_exits_1(self):
        assert cli_main([]) == 1

    def test_help_exits_0(self, capsys):
        assert cli_main(["--help"]) == 0
        assert "digcl" in capsys.readouterr().out

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert cli_main(["entropy", "--edges", str(tmp_path / "nope.tsv")]) == 2
        assert "error" in capsys.readouterr().err


class TestConfigFile:
    def test_parse_and_defaults(self, tiny_config):
        cfg = load_config(tiny_config)
        assert cfg.epochs == 4 and cfg.d_emb == 8 and cfg.seed == 5
        assert cfg.tau == TrainConfig().tau  # untouched default

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("epochs = 3\nlearning_rte = 0.1\n")
        with pytest.raises(ValueError, match="unknown config key"):
            load_config(bad)

    def test_bool_and_comment_parsing(self, tmp_path):
        cfg_file = tmp_path / "c.cfg"
        cfg_file.write_text("# comment\nundirected_walks = true\ncross_terms = false\n")
        cfg = load_config(cfg_file)
        assert cfg.undirected_walks is True and cfg.cross_terms is False

    def test_malformed_line(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("epochs 3\n")
        with pytest.raises(ValueError, match="key = value"):
            load_config(bad)


class TestSbmCommand:
    def test_outputs_parse(self, dataset):
        g, _ = read_edge_list(dataset / "edges.tsv")
        assert g.n == 30
        labels = (dataset / "labels.csv").read_text().splitlines()
        assert len(labels) == 30 and set(labels) == {"0", "1"}

    def test_deterministic_files(self, tmp_path):
        args = ["sbm", "--n", "20", "--seed", "9", "--out"]
        assert cli_main(args + [str(tmp_path / "a")]) == 0
        assert cli_main(args + [str(tmp_path / "b")]) == 0
        assert sha256(tmp_path / "a" / "edges.tsv") == sha256(tmp_path / "b" / "edges.tsv")


class TestWalksCommand:
    def test_dumps_both_modes(self, dataset, tmp_path):
        out = tmp_path / "walks"
        code = cli_main(["walks", "--edges", str(dataset / "edges.tsv"),
                         "--length", "3", "--seed", "2", "--out", str(out)])
        assert code == 0
        for name in ("paths_bfs.txt", "paths_dfs.txt"):
            ps = load_path_set(out / name)
            assert len(ps.paths) == 30
            for v, path in enumerate(ps.paths):
                assert path[0] == v


class TestEntropyCommand:
    def test_report_and_verifiers(self, dataset, tmp_path, capsys):
        out = tmp_path / "spectral"
        code = cli_main(["entropy", "--edges", str(dataset / "edges.tsv"),
                         "--q", "0.1", "--beta", "1.0", "--verify-theorems",
                         "--out", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert stdout.startswith("H=")
        assert "monotonic-response" in stdout and "bounded-variation" in stdout
        assert "FAIL" not in stdout
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n"] == 30
        lines = (out / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "k,lambda,p" and len(lines) == 31


class TestTrainEvalPipeline:
    def test_train_eval_and_determinism(self, dataset, tiny_config, tmp_path, capsys):
        run_a = tmp_path / "run_a"
        run_b = tmp_path / "run_b"
        base = ["train", "--edges", str(dataset / "edges.tsv"),
                "--config", str(tiny_config)]
        assert cli_main(base + ["--out", str(run_a)]) == 0
        assert cli_main(base + ["--out", str(run_b)]) == 0

        trace_a = load_trace(run_a / "trace.csv")
        trace_b = load_trace(run_b / "trace.csv")
        assert [r["l_total"] for r in trace_a] == [r["l_total"] for r in trace_b]
        assert len(trace_a) == 4

        ckpt = run_a / "checkpoint.json"
        before = sha256(ckpt)
        capsys.readouterr()
        for task, extra in (
            ("node", ["--labels", str(dataset / "labels.csv")]),
            ("link-exist", []),
            ("link-dir", []),
        ):
            code = cli_main(["eval", "--task", task, "--ckpt", str(ckpt),
                             "--edges", str(dataset / "edges.tsv"),
                             "--seed", "1", "--out", str(tmp_path / f"{task}.json")] + extra)
            assert code == 0
            line = capsys.readouterr().out
            assert f"task={task}" in line and "accuracy=" in line
            metrics = json.loads((tmp_path / f"{task}.json").read_text())
            assert metrics["task"] == task and 0.0 <= metrics["accuracy"] <= 1.0
        assert sha256(ckpt) == before  # eval never touches the checkpoint

    def test_eval_metrics_deterministic(self, dataset, tiny_config, tmp_path):
        run = tmp_path / "run"
        assert cli_main(["train", "--edges", str(dataset / "edges.tsv"),
                         "--config", str(tiny_config), "--out", str(run)]) == 0
        args = ["eval", "--task", "link-dir", "--ckpt", str(run / "checkpoint.json"),
                "--edges", str(dataset / "edges.tsv"), "--seed", "4", "--out"]
        assert cli_main(args + [str(tmp_path / "m1.json")]) == 0
        assert cli_main(args + [str(tmp_path / "m2.json")]) == 0
        assert sha256(tmp_path / "m1.json") == sha256(tmp_path / "m2.json")

    def test_node_task_requires_labels(self, dataset, tiny_config, tmp_path):
        run = tmp_path / "run"
        assert cli_main(["train", "--edges", str(dataset / "edges.tsv"),
                         "--config", str(tiny_config), "--out", str(run)]) == 0
        code = cli_main(["eval", "--task", "node", "--ckpt", str(run / "checkpoint.json"),
                         "--edges", str(dataset / "edges.tsv")])
        assert code == 2

    def test_feature_width_mismatch_exits_2(self, dataset, tiny_config, tmp_path):
        run = tmp_path / "run"
        assert cli_main(["train", "--edges", str(dataset / "edges.tsv"),
                         "--config", str(tiny_config), "--out", str(run)]) == 0
        feats = tmp_path / "x.csv"
        feats.write_text("\n".join("1,0" for _ in range(30)) + "\n")
        code = cli_main(["eval", "--task", "link-dir", "--ckpt", str(run / "checkpoint.json"),
                         "--edges", str(dataset / "edges.tsv"), "--features", str(feats)])
        assert code == 2
