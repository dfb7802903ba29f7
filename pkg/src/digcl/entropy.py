"""Spectral entropy diagnostics for Hermitian graph operators.

The entropy of a graph operator is the Shannon entropy of the Gibbs
distribution over its spectrum, ``p_k = exp(-beta * lambda_k) / Z``.
Two verifiers check, numerically, how that entropy responds to charge
changes: a derivative identity relating ``dH/dq`` to the spectral
covariance of eigenvalues and their sensitivities, and an upper bound
on ``|Delta H|`` in terms of the Frobenius norm of the operator change.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .digraph import Digraph
from .magnetic import check_hermitian, uniform_charge_laplacian

__all__ = [
    "hermitian_eigh",
    "SpectralReport",
    "von_neumann_entropy",
    "entropy_from_eigenvalues",
    "entropy_variation",
    "MonotonicReport",
    "verify_monotonic_response",
    "BoundedReport",
    "verify_bounded_variation",
    "worker_count",
    "map_cases",
]


def hermitian_eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix: ascending real
    eigenvalues and unitary eigenvector columns.

    Raises on non-Hermitian input rather than silently symmetrizing.
    """
    check_hermitian(np.asarray(h))
    eigenvalues, vectors = np.linalg.eigh(h)
    return eigenvalues, vectors


def _gibbs_weights(eigenvalues: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Gibbs weights over a spectrum plus ``log Z``, shifted by the
    smallest eigenvalue before exponentiation to avoid overflow."""
    shift = float(eigenvalues.min())
    w = np.exp(-beta * (eigenvalues - shift))
    total = float(w.sum())
    log_z = math.log(total) - beta * shift
    return w / total, log_z


@dataclass
class SpectralReport:
    """Spectrum, Gibbs weights and entropy of one Hermitian operator."""

    eigenvalues: np.ndarray
    weights: np.ndarray
    partition: float
    entropy: float
    entropy_gibbs_form: float
    beta: float

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "lambda", "p"])
            for k, (lam, p) in enumerate(zip(self.eigenvalues, self.weights)):
                writer.writerow([k, f"{lam:.17g}", f"{p:.17g}"])

    def summary(self) -> dict:
        return {
            "H": self.entropy,
            "Z": self.partition,
            "beta": self.beta,
            "n": self.n,
        }

    def save_summary(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.summary(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )


def entropy_from_eigenvalues(eigenvalues: np.ndarray, beta: float) -> SpectralReport:
    if beta <= 0.0:
        raise ValueError(f"beta must be > 0, got {beta}")
    eigenvalues = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    p, log_z = _gibbs_weights(eigenvalues, beta)
    positive = p > 0.0
    h_shannon = float(-(p[positive] * np.log(p[positive])).sum())
    h_gibbs = beta * float(p @ eigenvalues) + log_z
    if abs(h_shannon - h_gibbs) > 1e-9:
        raise ArithmeticError(
            f"entropy forms disagree: {h_shannon} vs {h_gibbs}"
        )
    n = eigenvalues.shape[0]
    if not -1e-12 <= h_shannon <= math.log(n) + 1e-12:
        raise ArithmeticError(f"entropy {h_shannon} outside [0, log {n}]")
    partition = math.inf if log_z > 709.0 else math.exp(log_z)
    return SpectralReport(
        eigenvalues=eigenvalues,
        weights=p,
        partition=partition,
        entropy=h_shannon,
        entropy_gibbs_form=h_gibbs,
        beta=beta,
    )


def von_neumann_entropy(h: np.ndarray, beta: float) -> SpectralReport:
    """Entropy of the Gibbs density ``exp(-beta H) / Tr exp(-beta H)``.

    Computed from the spectrum in two algebraically equal forms,
    ``-sum p log p`` and ``beta * E[lambda] + log Z``, which are
    cross-checked to 1e-9; the report carries both.
    """
    eigenvalues, _ = hermitian_eigh(h)
    return entropy_from_eigenvalues(eigenvalues, beta)


def entropy_variation(g: Digraph, q: float, delta_q: float, beta: float = 1.0) -> float:
    """Entropy change ``H(q + delta_q) - H(q)`` under a uniform charge
    on every edge (no flips, no jitter)."""
    for name, value in (("q", q), ("q + delta_q", q + delta_q)):
        if not 0.0 <= value <= 0.25:
            raise ValueError(f"{name} must be in [0, 0.25], got {value}")
    h_base = von_neumann_entropy(uniform_charge_laplacian(g, q), beta).entropy
    h_shifted = von_neumann_entropy(uniform_charge_laplacian(g, q + delta_q), beta).entropy
    return h_shifted - h_base


@dataclass
class MonotonicReport:
    """Finite-difference check of the entropy derivative identity
    ``dH/dq = -beta^2 * Cov_p(lambda, dlambda/dq)``."""

    status: str  # PASS, FLAG or FAIL
    lhs: float
    rhs: float
    rel_err: float
    min_gap: float
    n: int
    q: float
    beta: float
    eps: float

    def line(self) -> str:
        if self.status == "FLAG":
            return (
                f"FLAG monotonic-response n={self.n} q={self.q:g} beta={self.beta:g} "
                f"reason=near-degenerate-spectrum min_gap={self.min_gap:.3e}"
            )
        return (
            f"{self.status} monotonic-response n={self.n} q={self.q:g} "
            f"beta={self.beta:g} lhs={self.lhs:.6e} rhs={self.rhs:.6e} "
            f"rel_err={self.rel_err:.3e}"
        )


def verify_monotonic_response(
    g: Digraph, q: float, beta: float = 1.0, eps: float = 1e-5
) -> MonotonicReport:
    """Compare the central finite difference of ``H(q)`` against
    ``-beta^2 * Cov_p(lambda, dlambda/dq)`` at a uniform charge ``q``.

    Eigenvalue sensitivities use matched central differences with
    sorted-order pairing, valid when the spectrum is simple; a minimal
    eigengap below 1e-6 yields a FLAG rather than a verdict.
    """
    if eps > 1e-4:
        raise ValueError(f"finite-difference step must be <= 1e-4, got {eps}")
    if not eps < q <= 0.25 - eps:
        raise ValueError(f"need eps < q <= 0.25 - eps, got q={q}, eps={eps}")
    base = np.linalg.eigvalsh(uniform_charge_laplacian(g, q))
    min_gap = float(np.diff(base).min()) if base.shape[0] > 1 else math.inf
    if min_gap <= 1e-6:
        return MonotonicReport(
            status="FLAG", lhs=math.nan, rhs=math.nan, rel_err=math.nan,
            min_gap=min_gap, n=g.n, q=q, beta=beta, eps=eps,
        )
    upper = np.linalg.eigvalsh(uniform_charge_laplacian(g, q + eps))
    lower = np.linalg.eigvalsh(uniform_charge_laplacian(g, q - eps))
    h_upper = entropy_from_eigenvalues(upper, beta).entropy
    h_lower = entropy_from_eigenvalues(lower, beta).entropy
    lhs = (h_upper - h_lower) / (2.0 * eps)
    lam_dot = (upper - lower) / (2.0 * eps)
    p, _ = _gibbs_weights(base, beta)
    covariance = float(p @ (base * lam_dot)) - float(p @ base) * float(p @ lam_dot)
    rhs = -beta * beta * covariance
    rel_err = abs(lhs - rhs) / max(1.0, abs(lhs))
    status = "PASS" if rel_err <= 1e-3 else "FAIL"
    return MonotonicReport(
        status=status, lhs=lhs, rhs=rhs, rel_err=rel_err,
        min_gap=min_gap, n=g.n, q=q, beta=beta, eps=eps,
    )


@dataclass
class BoundedReport:
    """Check that a finite charge change moves the entropy by at most
    ``(beta^2 / sqrt(n)) * sup_xi sigma_lambda(xi) * ||Delta L||_F``."""

    status: str  # PASS or FAIL
    delta_h: float
    bound: float
    slack: float
    n: int
    q: float
    delta_q: float
    beta: float

    def line(self) -> str:
        return (
            f"{self.status} bounded-variation n={self.n} q={self.q:g} "
            f"dq={self.delta_q:g} beta={self.beta:g} |dH|={abs(self.delta_h):.6e} "
            f"bound={self.bound:.6e} slack={self.slack:.6e}"
        )


def verify_bounded_variation(
    g: Digraph, q: float, delta_q: float, beta: float = 1.0, grid: int = 16
) -> BoundedReport:
    """Evaluate both sides of the bounded-entropy-variation inequality
    at uniform charges ``q`` and ``q + delta_q``.

    The intermediate charge the bound refers to is unknown, so the
    Gibbs-weighted eigenvalue standard deviation is maximized over a
    ``grid`` of evenly spaced charges between the two endpoints, which
    keeps the check conservative.
    """
    for name, value in (("q", q), ("q + delta_q", q + delta_q)):
        if not 0.0 <= value <= 0.25:
            raise ValueError(f"{name} must be in [0, 0.25], got {value}")
    if grid < 1:
        raise ValueError(f"grid must be >= 1, got {grid}")
    lap_base = uniform_charge_laplacian(g, q)
    lap_shift = uniform_charge_laplacian(g, q + delta_q)
    h_base = von_neumann_entropy(lap_base, beta).entropy
    h_shift = von_neumann_entropy(lap_shift, beta).entropy
    delta_h = h_shift - h_base
    delta_norm = float(np.linalg.norm(lap_shift - lap_base))

    sigma_sup = 0.0
    for xi in np.linspace(q, q + delta_q, grid):
        lam = np.linalg.eigvalsh(uniform_charge_laplacian(g, float(xi)))
        p, _ = _gibbs_weights(lam, beta)
        variance = max(float(p @ (lam * lam)) - float(p @ lam) ** 2, 0.0)
        sigma_sup = max(sigma_sup, math.sqrt(variance))

    bound = (beta * beta / math.sqrt(g.n)) * sigma_sup * delta_norm
    slack = bound - abs(delta_h)
    status = "PASS" if abs(delta_h) <= bound else "FAIL"
    return BoundedReport(
        status=status, delta_h=delta_h, bound=bound, slack=slack,
        n=g.n, q=q, delta_q=delta_q, beta=beta,
    )


def worker_count() -> int:
    """Worker fan-out cap from the DIGCL_THREADS environment variable."""
    try:
        return max(1, int(os.environ.get("DIGCL_THREADS", "1")))
    except ValueError:
        return 1


def map_cases(fn: Callable, cases: Iterable) -> list:
    """Run independent verification cases, optionally across threads.

    Each case must carry its own seed material, so the result list is
    identical regardless of worker count.
    """
    cases = list(cases)
    workers = worker_count()
    if workers <= 1 or len(cases) <= 1:
        return [fn(case) for case in cases]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cases))
