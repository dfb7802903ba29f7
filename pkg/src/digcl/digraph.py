"""Directed graph core: representation, file I/O, splits and synthetic data.

Node ids are dense integers in ``[0, n)`` so that adjacency can be
array-indexed.  Graphs are simple (no self-loops, no duplicate directed
edges) and immutable after construction.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .seeding import stream

__all__ = [
    "Digraph",
    "ParseError",
    "LoadReport",
    "EdgeSplit",
    "load_edge_list",
    "read_edge_list",
    "save_edge_list",
    "load_features",
    "read_features",
    "load_labels",
    "read_labels",
    "degrees",
    "undirected_distance_leq2",
    "split_edges",
    "save_split",
    "load_split",
    "generate_directed_sbm",
]


class ParseError(ValueError):
    """Malformed input file; carries the offending line or row number."""


class Digraph:
    """Simple directed graph over dense integer node ids.

    Parameters
    ----------
    n : total node count (isolated nodes allowed).
    edges : iterable of ordered pairs ``(u, v)``; must be self-loop free
        and duplicate free, with endpoints in ``[0, n)``.
    """

    __slots__ = ("n", "edges", "m", "out_adj", "in_adj", "_out_sets", "_in_sets")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]):
        if n < 1:
            raise ValueError(f"node count must be >= 1, got {n}")
        edge_list = sorted((int(u), int(v)) for u, v in edges)
        self.n = int(n)
        self.edges = tuple(edge_list)
        self.m = len(edge_list)
        out_adj: list[list[int]] = [[] for _ in range(n)]
        in_adj: list[list[int]] = [[] for _ in range(n)]
        seen: set[tuple[int, int]] = set()
        for u, v in edge_list:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ValueError(f"self-loop ({u}, {v}) not allowed")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            out_adj[u].append(v)
            in_adj[v].append(u)
        self.out_adj = tuple(tuple(a) for a in out_adj)
        self.in_adj = tuple(tuple(a) for a in in_adj)
        self._out_sets = tuple(frozenset(a) for a in out_adj)
        self._in_sets = tuple(frozenset(a) for a in in_adj)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._out_sets[u]

    def adjacency(self) -> np.ndarray:
        """Dense asymmetric 0/1 adjacency matrix."""
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = 1.0
        return a

    def reverse(self) -> "Digraph":
        """Graph with every edge direction flipped."""
        return Digraph(self.n, [(v, u) for u, v in self.edges])

    def relabel(self, perm: Sequence[int]) -> "Digraph":
        """Relabel node ``v`` as ``perm[v]``; ``perm`` must be a permutation."""
        p = list(perm)
        if sorted(p) != list(range(self.n)):
            raise ValueError("perm is not a permutation of node ids")
        return Digraph(self.n, [(p[u], p[v]) for u, v in self.edges])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Digraph)
            and self.n == other.n
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Digraph(n={self.n}, m={self.m})"


@dataclass
class LoadReport:
    """What an edge-list load dropped or remapped."""

    dropped_self_loops: int = 0
    dropped_duplicates: int = 0
    id_map: dict[int, int] | None = None


_HEADER_RE = re.compile(r"^#\s*nodes\s*=\s*(\d+)\s*$")


def _as_lines(source) -> Iterable[str]:
    if isinstance(source, (str, bytes)):
        text = source.decode() if isinstance(source, bytes) else source
        return text.splitlines()
    if isinstance(source, io.IOBase):
        return source.read().splitlines()
    return source


def load_edge_list(source, compact: bool = False) -> tuple[Digraph, LoadReport]:
    """Parse a tab-separated edge list into a :class:`Digraph`.

    Format: one ``src<TAB>dst`` pair per line, ``#`` comments allowed,
    and an optional ``# nodes=N`` header that fixes the node count
    (otherwise ``n = 1 + max node id``).  Self-loops and duplicate
    directed edges are dropped, with counts in the returned report.
    With ``compact=True``, sparse node ids are remapped onto ``[0, k)``
    and the report carries the old-to-new id map.

    Raises :class:`ParseError` on malformed lines (with the line
    number) and on input that contains no edges and no header.
    """
    header_n: int | None = None
    raw_edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    report = LoadReport()
    for lineno, raw in enumerate(_as_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            match = _HEADER_RE.match(line)
            if match:
                header_n = int(match.group(1))
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'src<TAB>dst', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer node id in {line!r}") from None
        if u < 0 or v < 0:
            raise ParseError(f"line {lineno}: negative node id in {line!r}")
        if u == v:
            report.dropped_self_loops += 1
            continue
        if (u, v) in seen:
            report.dropped_duplicates += 1
            continue
        seen.add((u, v))
        raw_edges.append((u, v))

    if not raw_edges and header_n is None:
        raise ParseError("edge list contains no edges and no '# nodes=N' header")

    if compact:
        ids = sorted({x for e in raw_edges for x in e})
        id_map = {old: new for new, old in enumerate(ids)}
        report.id_map = id_map
        edges = [(id_map[u], id_map[v]) for u, v in raw_edges]
        n = max(len(ids), 1)
        if header_n is not None and header_n < n:
            raise ParseError(f"header nodes={header_n} below distinct id count {n}")
        return Digraph(header_n if header_n is not None else n, edges), report

    max_id = max((max(u, v) for u, v in raw_edges), default=-1)
    n = 1 + max_id if header_n is None else header_n
    if n <= max_id:
        raise ParseError(f"header nodes={n} does not cover max node id {max_id}")
    return Digraph(n, raw_edges), report


def read_edge_list(path, compact: bool = False) -> tuple[Digraph, LoadReport]:
    return load_edge_list(Path(path).read_text(encoding="utf-8"), compact=compact)


def save_edge_list(g: Digraph, path) -> None:
    """Write a graph in the same format :func:`load_edge_list` reads."""
    lines = [f"# nodes={g.n}"]
    lines.extend(f"{u}\t{v}" for u, v in g.edges)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_features(source, n: int) -> np.ndarray:
    """Parse a headerless numeric CSV into an ``(n, d)`` float matrix.

    Errors name the offending row: ragged rows, non-numeric cells and a
    row count different from ``n`` all raise :class:`ParseError`.
    """
    rows: list[list[float]] = []
    width: int | None = None
    for rowno, raw in enumerate(_as_lines(source)):
        line = raw.strip()
        if not line:
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(
                f"row {rowno}: expected {width} columns, got {len(cells)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise ParseError(f"row {rowno}: non-numeric cell in {line!r}") from None
    if len(rows) != n:
        raise ParseError(f"expected {n} feature rows, got {len(rows)}")
    x = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ParseError("feature matrix contains non-finite values")
    return x


def read_features(path, n: int) -> np.ndarray:
    return load_features(Path(path).read_text(encoding="utf-8"), n)


def load_labels(source, n: int) -> np.ndarray:
    """Parse a one-column headerless CSV of integer class labels."""
    values: list[int] = []
    for rowno, raw in enumerate(_as_lines(source)):
        line = raw.strip()
        if not line:
            continue
        try:
            values.append(int(float(line)))
        except ValueError:
            raise ParseError(f"row {rowno}: non-integer label {line!r}") from None
    if len(values) != n:
        raise ParseError(f"expected {n} labels, got {len(values)}")
    return np.asarray(values, dtype=np.int64)


def read_labels(path, n: int) -> np.ndarray:
    return load_labels(Path(path).read_text(encoding="utf-8"), n)


def degrees(g: Digraph) -> tuple[np.ndarray, np.ndarray]:
    """Per-node ``(in_degree, out_degree)`` counts."""
    d_in = np.array([len(a) for a in g.in_adj], dtype=np.int64)
    d_out = np.array([len(a) for a in g.out_adj], dtype=np.int64)
    return d_in, d_out


def undirected_distance_leq2(g: Digraph, u: int, x: int) -> int:
    """Distance between ``u`` and ``x`` on the underlying undirected
    graph, capped at 2: 0 iff equal, 1 iff some edge joins them in
    either direction, else 2."""
    if u == x:
        return 0
    if x in g._out_sets[u] or x in g._in_sets[u]:
        return 1
    return 2


@dataclass
class EdgeSplit:
    """Disjoint train/valid/test edge lists with matched negatives.

    Negatives are ordered node pairs that are non-edges in both
    directions, one per positive, disjoint across splits.
    """

    train: list[tuple[int, int]]
    valid: list[tuple[int, int]]
    test: list[tuple[int, int]]
    train_neg: list[tuple[int, int]]
    valid_neg: list[tuple[int, int]]
    test_neg: list[tuple[int, int]]

    def positives(self) -> list[tuple[int, int]]:
        return self.train + self.valid + self.test


def _largest_remainder_sizes(m: int, ratios: Sequence[float]) -> list[int]:
    # Ties go to the later split; empty splits are then topped up from train.
    quotas = [r * m for r in ratios]
    sizes = [int(np.floor(q)) for q in quotas]
    left = m - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (quotas[i] - sizes[i], i), reverse=True)
    for i in order[:left]:
        sizes[i] += 1
    for i in range(1, len(sizes)):
        if sizes[i] == 0:
            if sizes[0] <= 1:
                raise ValueError(f"graph too small to fill split {i} (m={m})")
            sizes[0] -= 1
            sizes[i] += 1
    if min(sizes) == 0:
        raise ValueError(f"graph too small to fill every split (m={m})")
    return sizes


def split_edges(
    g: Digraph,
    ratios: tuple[float, float, float] = (0.80, 0.15, 0.05),
    seed: int = 0,
) -> EdgeSplit:
    """Randomly partition edges into train/valid/test and sample one
    negative (non-edge in both directions) per positive.

    Sizes follow largest-remainder rounding of ``ratios``; the result
    is deterministic for a given seed.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be non-negative")
    if g.m < 3:
        raise ValueError(f"need at least 3 edges to split, got m={g.m}")
    sizes = _largest_remainder_sizes(g.m, ratios)
    rng = stream(seed, "edge-split")
    perm = rng.permutation(g.m)
    shuffled = [g.edges[i] for i in perm]
    train = shuffled[: sizes[0]]
    valid = shuffled[sizes[0] : sizes[0] + sizes[1]]
    test = shuffled[sizes[0] + sizes[1] :]

    adjacent = {(u, v) for u, v in g.edges}
    adjacent |= {(v, u) for u, v in g.edges}
    capacity = g.n * (g.n - 1) - len(adjacent)
    if capacity < g.m:
        raise ValueError(
            f"not enough non-adjacent ordered pairs ({capacity}) for {g.m} negatives"
        )
    negatives: list[tuple[int, int]] = []
    chosen: set[tuple[int, int]] = set()
    attempts = 0
    max_attempts = 200 * g.m + 1000
    while len(negatives) < g.m and attempts < max_attempts:
        attempts += 1
        u = int(rng.integers(g.n))
        v = int(rng.integers(g.n))
        if u == v or (u, v) in adjacent or (u, v) in chosen:
            continue
        chosen.add((u, v))
        negatives.append((u, v))
    if len(negatives) < g.m:
        # Dense graph: fall back to exact enumeration of the complement.
        pool = [
            (u, v)
            for u in range(g.n)
            for v in range(g.n)
            if u != v and (u, v) not in adjacent and (u, v) not in chosen
        ]
        take = g.m - len(negatives)
        idx = rng.choice(len(pool), size=take, replace=False)
        negatives.extend(pool[i] for i in idx)

    return EdgeSplit(
        train=train,
        valid=valid,
        test=test,
        train_neg=negatives[: sizes[0]],
        valid_neg=negatives[sizes[0] : sizes[0] + sizes[1]],
        test_neg=negatives[sizes[0] + sizes[1] :],
    )


_SPLIT_PARTS = ("train", "valid", "test")


def save_split(split: EdgeSplit, directory) -> None:
    """Persist a split as three edge-list files plus negatives."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for part in _SPLIT_PARTS:
        for suffix, pairs in (("", getattr(split, part)), (".neg", getattr(split, part + "_neg"))):
            lines = [f"{u}\t{v}" for u, v in pairs]
            (directory / f"{part}{suffix}.tsv").write_text(
                "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
            )


def load_split(directory) -> EdgeSplit:
    directory = Path(directory)

    def read(name: str) -> list[tuple[int, int]]:
        pairs = []
        for line in (directory / name).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line:
                u, v = line.split("\t")
                pairs.append((int(u), int(v)))
        return pairs

    return EdgeSplit(
        train=read("train.tsv"),
        valid=read("valid.tsv"),
        test=read("test.tsv"),
        train_neg=read("train.neg.tsv"),
        valid_neg=read("valid.neg.tsv"),
        test_neg=read("test.neg.tsv"),
    )


def generate_directed_sbm(
    n: int,
    p_fwd: float,
    p_back: float,
    p_cross: float,
    seed: int = 0,
) -> tuple[Digraph, np.ndarray]:
    """Two-block directed stochastic block model with a planted
    orientation signal.

    Within each block, the pair ``u < v`` gets edge ``u -> v`` with
    probability ``p_fwd`` and ``v -> u`` with probability ``p_back``,
    so low ids point at high ids when ``p_fwd > p_back``.  Cross-block
    ordered pairs get edges independently with probability ``p_cross``.
    Returns the graph and per-node block labels.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    for name, p in (("p_fwd", p_fwd), ("p_back", p_back), ("p_cross", p_cross)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    rng = stream(seed, "sbm")
    half = n // 2
    edges: list[tuple[int, int]] = []
    iu, iv = np.triu_indices(half, k=1)
    for offset in (0, half):
        fwd = rng.random(iu.shape[0]) < p_fwd
        back = rng.random(iu.shape[0]) < p_back
        edges.extend(zip((iu[fwd] + offset).tolist(), (iv[fwd] + offset).tolist()))
        edges.extend(zip((iv[back] + offset).tolist(), (iu[back] + offset).tolist()))
    cross_ab = rng.random((half, half)) < p_cross
    cross_ba = rng.random((half, half)) < p_cross
    au, av = np.nonzero(cross_ab)
    edges.extend(zip(au.tolist(), (av + half).tolist()))
    bu, bv = np.nonzero(cross_ba)
    edges.extend(zip((bu + half).tolist(), bv.tolist()))
    labels = np.repeat([0, 1], half)
    return Digraph(n, edges), labels
