"""Complex-domain operators for directed graphs.

Direction is encoded in the phase of a Hermitian Laplacian
``L = D_s - A_s * exp(i * Theta)``: the magnitude of an entry says an
edge exists, its phase says which way it points.  Per-edge charges are
personalized from node-level degree-balance uncertainty, and stochastic
phase flips plus charge jitter produce perturbed views of the same
graph without rewiring it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .digraph import Digraph, degrees
from .seeding import uniform01_pair

__all__ = [
    "HERMITIAN_TOL",
    "is_hermitian",
    "check_hermitian",
    "symmetrize",
    "node_uncertainty",
    "ChargeField",
    "personalized_charge",
    "PerturbationSpec",
    "sample_phase_factor",
    "sample_perturbed_factor",
    "build_phase",
    "build_magnetic_laplacian",
    "uniform_charge_laplacian",
    "perturbed_laplacian",
]

HERMITIAN_TOL = 1e-10


def is_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        return False
    return bool(np.abs(h - h.conj().T).max(initial=0.0) <= tol)


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    if not is_hermitian(h, tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    return h


def symmetrize(g: Digraph) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrized adjacency ``A_s = (A + A^T) / 2`` and its degree
    matrix ``D_s``.  Directed-only edges contribute weight 1/2."""
    a = g.adjacency()
    a_s = 0.5 * (a + a.T)
    d_s = np.diag(a_s.sum(axis=1))
    return a_s, d_s


def node_uncertainty(g: Digraph, smoothing: bool = False) -> np.ndarray:
    """Degree-balance uncertainty per node, in bits.

    Scores ``-(p_in*log(p_in) + p_out*log(p_out)) / log 2`` with
    ``p = degree / m`` and the convention ``0 * log 0 = 0``.  Nodes
    whose in- and out-degree are both balanced and small relative to m
    score high; pure sources and sinks that carry every edge score 0.
    With ``smoothing=True`` degrees are Laplace-smoothed,
    ``p = (degree + 1) / (m + n)``, which keeps every score positive.
    """
    if g.m == 0:
        raise ValueError("uncertainty undefined on an empty graph (m=0)")
    d_in, d_out = degrees(g)
    if smoothing:
        p_in = (d_in + 1.0) / (g.m + g.n)
        p_out = (d_out + 1.0) / (g.m + g.n)
    else:
        p_in = d_in / g.m
        p_out = d_out / g.m

    def xlogx(p: np.ndarray) -> np.ndarray:
        out = np.zeros_like(p, dtype=np.float64)
        mask = p > 0
        out[mask] = p[mask] * np.log(p[mask])
        return out

    return -(xlogx(p_in) + xlogx(p_out)) / math.log(2.0)


@dataclass
class ChargeField:
    """Per-edge charges ``q* = q0 * tanh((U_u + U_v) / mean(U))``.

    ``q_star`` is keyed by the unordered node pair (smaller id first)
    and is symmetric by construction.
    """

    q0: float
    q_star: dict[tuple[int, int], float]
    uncertainty: np.ndarray
    mean_uncertainty: float

    def q_star_of(self, u: int, v: int) -> float:
        return self.q_star[(u, v) if u < v else (v, u)]


def personalized_charge(g: Digraph, q0: float, smoothing: bool = False) -> ChargeField:
    """Charge field adapting phase strength to local directional
    uncertainty; edges between high-uncertainty nodes get charges close
    to ``q0``, edges between low-uncertainty nodes get weaker ones.

    Raises if the uncertainty field is degenerate (``mean(U) = 0``).
    """
    if not 0.0 < q0 <= 0.25:
        raise ValueError(f"base charge q0 must be in (0, 0.25], got {q0}")
    u_field = node_uncertainty(g, smoothing=smoothing)
    mean_u = float(u_field.mean())
    if mean_u <= 0.0:
        raise ValueError("degenerate uncertainty field: mean(U) = 0")
    q_star: dict[tuple[int, int], float] = {}
    for u, v in g.edges:
        pair = (u, v) if u < v else (v, u)
        if pair not in q_star:
            q_star[pair] = q0 * math.tanh((u_field[u] + u_field[v]) / mean_u)
    return ChargeField(q0=q0, q_star=q_star, uncertainty=u_field, mean_uncertainty=mean_u)


@dataclass(frozen=True)
class PerturbationSpec:
    """One stochastic complex-domain view: keep an edge's phase factor
    with probability ``r`` (flip it to ``1 - charge`` otherwise) and
    jitter the charge uniformly within ``+/- delta_q_max``."""

    r: float
    delta_q_max: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"flip-keep probability r must be in [0, 1], got {self.r}")
        if self.delta_q_max < 0.0:
            raise ValueError(f"delta_q_max must be >= 0, got {self.delta_q_max}")


def _pair_key(u: int, v: int, node_keys) -> tuple[int, int]:
    if node_keys is None:
        return (u, v) if u < v else (v, u)
    ku, kv = int(node_keys[u]), int(node_keys[v])
    return (ku, kv) if ku < kv else (kv, ku)


def _effective_charge(q_star: float, spec: PerturbationSpec, ka: int, kb: int) -> float:
    u_flip, u_jitter = uniform01_pair(spec.seed, "phase", ka, kb)
    jitter = (2.0 * u_jitter - 1.0) * spec.delta_q_max
    charge = min(max(q_star + jitter, 0.0), 0.25)
    return charge if u_flip < spec.r else 1.0 - charge


def sample_phase_factor(
    cf: ChargeField, spec: PerturbationSpec, node_keys=None
) -> dict[tuple[int, int], float]:
    """Draw the per-edge phase factor: ``q*`` with probability ``r``,
    else ``1 - q*``; one draw per unordered pair, shared by both
    orientations.  Deterministic per ``spec.seed``.
    """
    no_jitter = PerturbationSpec(r=spec.r, delta_q_max=0.0, seed=spec.seed)
    return sample_perturbed_factor(cf, no_jitter, node_keys=node_keys)


def sample_perturbed_factor(
    cf: ChargeField, spec: PerturbationSpec, node_keys=None
) -> dict[tuple[int, int], float]:
    """Phase factor with charge jitter: per unordered pair the charge
    ``q*`` is shifted by a uniform draw in ``[-delta_q_max, +delta_q_max]``,
    clipped into ``[0, 0.25]``, then kept or flipped to its complement
    with probability ``r``.  The flip draw shares its random slot with
    :func:`sample_phase_factor`, so a zero jitter bound reproduces it
    exactly.
    """
    phi: dict[tuple[int, int], float] = {}
    for pair, q_star in cf.q_star.items():
        ka, kb = _pair_key(pair[0], pair[1], node_keys)
        phi[pair] = _effective_charge(q_star, spec, ka, kb)
    return phi


def build_phase(g: Digraph, phi: dict[tuple[int, int], float]) -> np.ndarray:
    """Antisymmetric phase matrix ``Theta(u,v) = 2*pi*(A(u,v)-A(v,u))*phi``.

    ``phi`` is keyed by unordered pair; reciprocal edges cancel to a
    zero phase.  ``Theta(u,v) == -Theta(v,u)`` holds exactly.
    """
    theta = np.zeros((g.n, g.n))
    for (a, b), factor in sorted(phi.items()):
        sign = (1.0 if g.has_edge(a, b) else 0.0) - (1.0 if g.has_edge(b, a) else 0.0)
        if sign == 0.0:
            continue
        value = 2.0 * math.pi * sign * factor
        theta[a, b] = value
        theta[b, a] = -value
    return theta


def build_magnetic_laplacian(
    a_s: np.ndarray, d_s: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """Hermitian Laplacian ``L = D_s - A_s * exp(i * Theta)``.

    With ``Theta == 0`` this is the ordinary symmetric Laplacian of the
    weighted undirected graph ``A_s``.
    """
    lap = d_s.astype(np.complex128) - a_s * np.exp(1j * theta)
    return check_hermitian(lap)


def uniform_charge_laplacian(g: Digraph, q: float) -> np.ndarray:
    """Magnetic Laplacian with one global charge ``q`` on every edge.

    Accepts the full Hermitian range ``q in [0, 0.5)`` for spectral
    diagnostics; view construction restricts charges to ``[0, 0.25]``.
    """
    if not 0.0 <= q < 0.5:
        raise ValueError(f"uniform charge must be in [0, 0.5), got {q}")
    a = g.adjacency()
    a_s = 0.5 * (a + a.T)
    d_s = np.diag(a_s.sum(axis=1))
    theta = 2.0 * math.pi * q * (a - a.T)
    return build_magnetic_laplacian(a_s, d_s, theta)


def perturbed_laplacian(
    g: Digraph,
    cf: ChargeField,
    spec: PerturbationSpec,
    node_keys=None,
) -> np.ndarray:
    """Stochastically perturbed personalized magnetic Laplacian.

    Draws the jittered-and-flipped phase factor of
    :func:`sample_perturbed_factor` and assembles the Hermitian
    Laplacian from it.  Both orientations of an edge share the same
    draws.  Deterministic per ``spec.seed``.
    """
    phi = sample_perturbed_factor(cf, spec, node_keys=node_keys)
    a_s, d_s = symmetrize(g)
    return build_magnetic_laplacian(a_s, d_s, build_phase(g, phi))
