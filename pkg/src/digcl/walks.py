"""Second-order direction-aware random walks.

A walk that just moved ``u -> v`` weights each out-neighbor ``x`` of
``v`` by how far ``x`` is from ``u`` on the underlying undirected
graph: ``1/p_return`` for going back (distance 0), 1 for staying in
``u``'s neighborhood (distance 1), ``1/q_inout`` for moving outward
(distance 2).  Small ``p_return`` with large ``q_inout`` keeps walks
local; the opposite regime pushes them deep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .digraph import Digraph, undirected_distance_leq2
from .seeding import stream

__all__ = [
    "WalkParams",
    "PathSet",
    "transition_weights",
    "sample_walk",
    "sample_path_views",
    "save_path_set",
    "load_path_set",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WalkParams:
    """Second-order walk configuration.

    ``length`` counts steps after the start node, so a completed walk
    visits ``length + 1`` nodes.  ``seed`` identifies this parameter
    set's random sub-stream; two parameter sets with equal fields
    produce identical walks.
    """

    p_return: float
    q_inout: float
    length: int
    seed: int = 0

    def __post_init__(self):
        if not (self.p_return > 0 and np.isfinite(self.p_return)):
            raise ValueError(f"p_return must be finite and > 0, got {self.p_return}")
        if not (self.q_inout > 0 and np.isfinite(self.q_inout)):
            raise ValueError(f"q_inout must be finite and > 0, got {self.q_inout}")
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")


@dataclass
class PathSet:
    """One sampled walk per node; ``paths[v][0] == v``."""

    paths: list[list[int]]
    mode: str
    params: WalkParams
    directed: bool = True


def transition_weights(
    g: Digraph, prev: int, cur: int, wp: WalkParams
) -> dict[int, float]:
    """Unnormalized second-order weights over the out-neighbors of
    ``cur`` for a walk that arrived via ``prev -> cur``.

    Pairs without a directed edge from ``cur`` are simply absent.
    Returns an empty map when ``cur`` is a sink.
    """
    weights: dict[int, float] = {}
    for x in g.out_adj[cur]:
        d = undirected_distance_leq2(g, prev, x)
        if d == 0:
            weights[x] = 1.0 / wp.p_return
        elif d == 1:
            weights[x] = 1.0
        else:
            weights[x] = 1.0 / wp.q_inout
    return weights


def _neighbors(g: Digraph, v: int, directed: bool) -> list[int]:
    if directed:
        return list(g.out_adj[v])
    return sorted(set(g.out_adj[v]) | set(g.in_adj[v]))


def _pick(candidates: list[int], weights: list[float], rng: np.random.Generator) -> int:
    total = sum(weights)
    u = rng.random() * total
    acc = 0.0
    for node, w in zip(candidates, weights):
        acc += w
        if u < acc:
            return node
    return candidates[-1]


def sample_walk(
    g: Digraph,
    start: int,
    wp: WalkParams,
    rng: np.random.Generator | None = None,
    directed: bool = True,
    node_keys=None,
) -> list[int]:
    """Sample one walk of up to ``wp.length`` steps from ``start``.

    The first step is uniform over the start's out-neighbors (there is
    no previous edge yet); later steps follow the second-order weights.
    Dead ends truncate the walk, so every consecutive pair in the
    result is a directed edge.  Without an explicit ``rng`` the walk is
    deterministic per ``(wp.seed, start)``.

    ``directed=False`` walks the underlying undirected graph instead
    (an ablation switch; the directed-edge guarantee no longer holds).
    ``node_keys`` reorders candidate tie-breaking by external node
    keys, which keeps walks aligned under graph relabeling.
    """
    if rng is None:
        rng = stream(wp.seed, "walk", start)
    path = [start]
    for _ in range(wp.length):
        cur = path[-1]
        candidates = _neighbors(g, cur, directed)
        if not candidates:
            break
        if node_keys is not None:
            candidates.sort(key=lambda x: node_keys[x])
        if len(path) == 1:
            weights = [1.0] * len(candidates)
        elif directed:
            table = transition_weights(g, path[-2], cur, wp)
            weights = [table[x] for x in candidates]
        else:
            prev = path[-2]
            weights = []
            for x in candidates:
                d = undirected_distance_leq2(g, prev, x)
                weights.append(1.0 / wp.p_return if d == 0 else 1.0 if d == 1 else 1.0 / wp.q_inout)
        path.append(_pick(candidates, weights, rng))
    return path


def sample_path_views(
    g: Digraph,
    bfs: WalkParams,
    dfs: WalkParams,
    seed: int = 0,
    node_keys=None,
    directed: bool = True,
) -> tuple[PathSet, PathSet]:
    """One local-mode and one deep-mode walk per node.

    The local parameter set should have ``p_return < 1 < q_inout`` and
    the deep one ``p_return > 1 > q_inout``; violations are logged, not
    fatal.  Each node's walk draws from a stream keyed by
    ``(seed, params.seed, node)``, so the result is independent of
    iteration order, and the two modes coincide exactly when given
    identical parameter sets.
    """
    if not (bfs.p_return < 1.0 < bfs.q_inout):
        log.warning(
            "local-mode walk params outside the p<1<q regime: p_return=%g q_inout=%g",
            bfs.p_return, bfs.q_inout,
        )
    if not (dfs.p_return > 1.0 > dfs.q_inout):
        log.warning(
            "deep-mode walk params outside the p>1>q regime: p_return=%g q_inout=%g",
            dfs.p_return, dfs.q_inout,
        )
    keys = node_keys if node_keys is not None else range(g.n)
    sets = []
    for mode, wp in (("bfs", bfs), ("dfs", dfs)):
        paths = [
            sample_walk(
                g, v, wp,
                rng=stream(seed, wp.seed, "walk", int(keys[v])),
                directed=directed,
                node_keys=node_keys,
            )
            for v in range(g.n)
        ]
        sets.append(PathSet(paths=paths, mode=mode, params=wp, directed=directed))
    return sets[0], sets[1]


def save_path_set(ps: PathSet, path) -> None:
    """One line per node, space-separated ids, params in a header."""
    header = (
        f"# mode={ps.mode} p_return={ps.params.p_return:g} "
        f"q_inout={ps.params.q_inout:g} length={ps.params.length} "
        f"seed={ps.params.seed} directed={int(ps.directed)}"
    )
    lines = [header] + [" ".join(str(x) for x in p) for p in ps.paths]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_path_set(path) -> PathSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# mode="):
        raise ValueError("path-set file is missing its header line")
    fields = dict(item.split("=", 1) for item in lines[0][2:].split())
    params = WalkParams(
        p_return=float(fields["p_return"]),
        q_inout=float(fields["q_inout"]),
        length=int(fields["length"]),
        seed=int(fields["seed"]),
    )
    paths = [[int(x) for x in line.split()] for line in lines[1:] if line.strip()]
    return PathSet(
        paths=paths,
        mode=fields["mode"],
        params=params,
        directed=bool(int(fields.get("directed", "1"))),
    )
