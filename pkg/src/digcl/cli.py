"""Command-line surface.

Subcommands: ``train`` (contrastive pre-training), ``eval`` (node
probe and link tasks on a frozen checkpoint), ``entropy`` (spectral
report and theorem verifiers), ``walks`` (dump sampled path sets) and
``sbm`` (emit a synthetic two-block dataset).  Exit codes: 0 success,
1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .digraph import (
    generate_directed_sbm,
    read_edge_list,
    read_features,
    read_labels,
    save_edge_list,
    split_edges,
)
from .entropy import (
    verify_bounded_variation,
    verify_monotonic_response,
    von_neumann_entropy,
)
from .evaluation import LinkTaskSpec, linear_probe, link_eval
from .magnetic import uniform_charge_laplacian
from .neural import load_checkpoint, save_checkpoint
from .seeding import stream
from .training import TrainConfig, embed, load_trace, save_trace, train
from .walks import WalkParams, sample_path_views, save_path_set

__all__ = ["cli_main", "main", "load_config"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise _UsageError(message)


_BOOL_VALUES = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def load_config(path) -> TrainConfig:
    """Parse a flat ``key = value`` config file into a TrainConfig.

    Every TrainConfig field is a valid key; unknown keys are errors so
    typos cannot silently change a run.
    """
    types = {f.name: f.type for f in fields(TrainConfig)}
    defaults = TrainConfig()
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in types:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        current = getattr(defaults, key)
        if isinstance(current, bool):
            if value.lower() not in _BOOL_VALUES:
                raise ValueError(f"{path}:{lineno}: bad boolean {value!r} for {key}")
            values[key] = _BOOL_VALUES[value.lower()]
        elif isinstance(current, int):
            values[key] = int(value)
        elif isinstance(current, float):
            values[key] = float(value)
        else:
            values[key] = value
    return TrainConfig.from_dict({**defaults.to_dict(), **values})


def _load_graph_features(args):
    g, _ = read_edge_list(args.edges)
    if getattr(args, "features", None):
        x = read_features(args.features, g.n)
    else:
        x = np.eye(g.n)
    return g, x


def _cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = TrainConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    g, x = _load_graph_features(args)
    params, trace = train(g, x, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_config = {**cfg.to_dict(), "d_in": x.shape[1]}
    save_checkpoint(out / "checkpoint.json", params, checkpoint_config)
    save_trace(trace, out / "trace.csv")
    final = trace[-1]["l_total"] if trace else float("nan")
    print(f"trained epochs={cfg.epochs} final_loss={final:.17g} out={out}")
    return 0


def _cmd_eval(args) -> int:
    params, config = load_checkpoint(args.ckpt)
    cfg = TrainConfig.from_dict({k: v for k, v in config.items() if k != "d_in"})
    g, x = _load_graph_features(args)
    if x.shape[1] != int(config["d_in"]):
        raise ValueError(
            f"feature width {x.shape[1]} does not match checkpoint d_in={config['d_in']}"
        )
    e = embed(g, x, params, cfg, seed=args.seed)
    if args.task == "node":
        if not args.labels:
            raise ValueError("--labels is required for the node task")
        labels = read_labels(args.labels, g.n)
        rng = stream(args.seed, "probe-split")
        perm = rng.permutation(g.n)
        n_train = max(1, int(round(args.train_frac * g.n)))
        train_mask = np.zeros(g.n, dtype=bool)
        train_mask[perm[:n_train]] = True
        test_mask = ~train_mask
        result = linear_probe(e, labels, train_mask, test_mask, seed=args.seed)
        metric = result.accuracy
    else:
        split = split_edges(g, seed=args.seed)
        task = "existence" if args.task == "link-exist" else "direction"
        metric = link_eval(e, LinkTaskSpec(task=task, split=split))
    print(f"task={args.task} accuracy={metric:.6f} seed={args.seed}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {"task": args.task, "accuracy": metric, "seed": args.seed},
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    return 0


def _cmd_entropy(args) -> int:
    g, _ = read_edge_list(args.edges)
    report = von_neumann_entropy(uniform_charge_laplacian(g, args.q), args.beta)
    print(
        f"H={report.entropy:.12g} Z={report.partition:.12g} "
        f"beta={report.beta:g} n={report.n}"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / "spectrum.csv")
        report.save_summary(out / "summary.json")
    if args.verify_theorems:
        print(verify_monotonic_response(g, args.q, beta=args.beta).line())
        print(
            verify_bounded_variation(
                g, args.q, args.dq, beta=args.beta, grid=args.grid
            ).line()
        )
    return 0


def _cmd_walks(args) -> int:
    g, _ = read_edge_list(args.edges)
    bfs = WalkParams(args.bfs_p, args.bfs_q, args.length, seed=0)
    dfs = WalkParams(args.dfs_p, args.dfs_q, args.length, seed=1)
    p_local, p_deep = sample_path_views(g, bfs, dfs, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_path_set(p_local, out / "paths_bfs.txt")
    save_path_set(p_deep, out / "paths_dfs.txt")
    print(f"wrote {g.n} walks per mode to {out}")
    return 0


def _cmd_sbm(args) -> int:
    g, labels = generate_directed_sbm(
        args.n, args.p_fwd, args.p_back, args.p_cross, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_edge_list(g, out / "edges.tsv")
    (out / "labels.csv").write_text(
        "\n".join(str(int(c)) for c in labels) + "\n", encoding="utf-8"
    )
    print(f"sbm n={g.n} m={g.m} out={out}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="digcl", description="Directed-graph contrastive learning toolkit")
    parser.add_argument("--version", action="version", version=f"digcl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="contrastive pre-training")
    p_train.add_argument("--edges", required=True)
    p_train.add_argument("--features")
    p_train.add_argument("--config")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(handler=_cmd_train)

    p_eval = sub.add_parser("eval", help="frozen-checkpoint evaluation")
    p_eval.add_argument("--task", required=True, choices=["node", "link-exist", "link-dir"])
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--edges", required=True)
    p_eval.add_argument("--features")
    p_eval.add_argument("--labels")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--train-frac", type=float, default=0.2)
    p_eval.add_argument("--out")
    p_eval.set_defaults(handler=_cmd_eval)

    p_entropy = sub.add_parser("entropy", help="spectral entropy report and verifiers")
    p_entropy.add_argument("--edges", required=True)
    p_entropy.add_argument("--q", type=float, default=0.1)
    p_entropy.add_argument("--beta", type=float, default=1.0)
    p_entropy.add_argument("--dq", type=float, default=0.05)
    p_entropy.add_argument("--grid", type=int, default=16)
    p_entropy.add_argument("--verify-theorems", action="store_true")
    p_entropy.add_argument("--out")
    p_entropy.set_defaults(handler=_cmd_entropy)

    p_walks = sub.add_parser("walks", help="dump sampled path sets")
    p_walks.add_argument("--edges", required=True)
    p_walks.add_argument("--length", type=int, default=4)
    p_walks.add_argument("--bfs-p", type=float, default=0.25)
    p_walks.add_argument("--bfs-q", type=float, default=4.0)
    p_walks.add_argument("--dfs-p", type=float, default=4.0)
    p_walks.add_argument("--dfs-q", type=float, default=0.25)
    p_walks.add_argument("--seed", type=int, default=0)
    p_walks.add_argument("--out", required=True)
    p_walks.set_defaults(handler=_cmd_walks)

    p_sbm = sub.add_parser("sbm", help="emit a synthetic two-block digraph")
    p_sbm.add_argument("--n", type=int, default=200)
    p_sbm.add_argument("--p-fwd", type=float, default=0.3)
    p_sbm.add_argument("--p-back", type=float, default=0.02)
    p_sbm.add_argument("--p-cross", type=float, default=0.02)
    p_sbm.add_argument("--seed", type=int, default=0)
    p_sbm.add_argument("--out", required=True)
    p_sbm.set_defaults(handler=_cmd_sbm)
    return parser


def cli_main(argv=None) -> int:
    """Entry point returning an exit code instead of raising."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(parser.format_usage(), file=sys.stderr, end="")
        print(f"digcl: error: {err}", file=sys.stderr)
        return 1
    except SystemExit as exit_:  # --help / --version
        return 0 if exit_.code in (0, None) else 1
    try:
        return args.handler(args)
    except (ValueError, OSError, ArithmeticError, RuntimeError) as err:
        print(f"digcl: error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
