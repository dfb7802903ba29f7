"""View construction, contrastive objective and the training loop.

Each epoch builds two views of the graph.  The anchor view combines
the unperturbed personalized-charge operator with local-mode walks;
the second view combines a freshly perturbed operator with deep-mode
walks.  A shared encoder maps both to embeddings, and an InfoNCE
objective with an inter-view and an intra-view term drives them
together, optimized by Adam on hand-computed gradients.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .digraph import Digraph
from .magnetic import (
    ChargeField,
    PerturbationSpec,
    build_phase,
    personalized_charge,
    sample_perturbed_factor,
    symmetrize,
)
from .neural import (
    ComplexFeatures,
    ModelParams,
    _encode_paths_backward,
    _encode_paths_forward,
    _mlp_backward,
    _mlp_forward,
    build_propagation,
    init_model_params,
    propagate,
    zero_gradients,
)
from .seeding import derive_int
from .walks import WalkParams, sample_path_views

__all__ = [
    "TrainConfig",
    "ViewPair",
    "TrainingDiverged",
    "cosine_similarity",
    "info_nce",
    "info_nce_with_grads",
    "adam_init",
    "adam_step",
    "build_views",
    "loss_and_grad",
    "train",
    "embed",
    "save_trace",
    "load_trace",
]

NORM_FLOOR = 1e-12


class TrainingDiverged(RuntimeError):
    """Loss or a gradient went non-finite; carries the epoch index."""

    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    """Full training run configuration; one flat key per field."""

    epochs: int = 200
    learning_rate: float = 1e-3
    tau: float = 0.5
    q0: float = 0.25
    r: float = 0.5
    delta_q_max: float = 0.05
    walk_length: int = 4
    bfs_p_return: float = 0.25
    bfs_q_inout: float = 4.0
    bfs_seed: int = 0
    dfs_p_return: float = 4.0
    dfs_q_inout: float = 0.25
    dfs_seed: int = 1
    d_emb: int = 64
    mlp_hidden: int = 128
    n_layers: int = 2
    seed: int = 0
    uncertainty_smoothing: bool = False
    cross_terms: bool = True
    view_pairing: str = "straight"
    undirected_walks: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"temperature tau must be > 0, got {self.tau}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 < self.q0 <= 0.25:
            raise ValueError(f"q0 must be in (0, 0.25], got {self.q0}")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must be in [0, 1], got {self.r}")
        if self.view_pairing not in ("straight", "crossed"):
            raise ValueError(
                f"view_pairing must be 'straight' or 'crossed', got {self.view_pairing!r}"
            )

    def bfs_params(self) -> WalkParams:
        return WalkParams(
            p_return=self.bfs_p_return, q_inout=self.bfs_q_inout,
            length=self.walk_length, seed=self.bfs_seed,
        )

    def dfs_params(self) -> WalkParams:
        return WalkParams(
            p_return=self.dfs_p_return, q_inout=self.dfs_q_inout,
            length=self.walk_length, seed=self.dfs_seed,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


@dataclass
class ViewPair:
    """Two aligned embedding matrices plus how each view was built."""

    e1: np.ndarray
    e2: np.ndarray
    provenance: tuple[dict, dict]


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, with norms floored at
    1e-12 so zero vectors compare as zero instead of dividing by 0."""
    na = max(float(np.linalg.norm(a)), NORM_FLOOR)
    nb = max(float(np.linalg.norm(b)), NORM_FLOOR)
    return float(np.dot(a, b) / (na * nb))


def _normalize_rows(e: np.ndarray):
    norms = np.sqrt((e * e).sum(axis=1))
    safe = np.maximum(norms, NORM_FLOOR)
    return e / safe[:, None], norms, safe


def _normalize_rows_backward(d_hat, e_hat, norms, safe):
    dots = (d_hat * e_hat).sum(axis=1, keepdims=True)
    d_e = (d_hat - e_hat * dots) / safe[:, None]
    floored = norms <= NORM_FLOOR
    if floored.any():
        d_e[floored] = d_hat[floored] / NORM_FLOOR
    return d_e


def _logsumexp_rows(a: np.ndarray):
    m = a.max(axis=1, keepdims=True)
    s = np.exp(a - m).sum(axis=1, keepdims=True)
    lse = (m + np.log(s)).ravel()
    softmax = np.exp(a - lse[:, None])
    return lse, softmax


def info_nce_with_grads(e1: np.ndarray, e2: np.ndarray, tau: float):
    """InfoNCE losses over aligned embedding rows plus their gradients.

    The inter-view term scores each row's aligned partner against all
    rows of the other view; the intra-view term penalizes large
    similarities among distinct rows within each view.  Log-sum-exp
    throughout.  Requires at least two rows (the intra sum over
    ``j != i`` is empty otherwise).
    """
    if tau <= 0:
        raise ValueError(f"temperature tau must be > 0, got {tau}")
    n = e1.shape[0]
    if e1.shape != e2.shape:
        raise ValueError(f"view shapes differ: {e1.shape} vs {e2.shape}")
    if n < 2:
        raise ValueError("intra term undefined for a single node (n must be >= 2)")
    n1, norms1, safe1 = _normalize_rows(e1)
    n2, norms2, safe2 = _normalize_rows(e2)

    s12 = (n1 @ n2.T) / tau
    lse12, p12 = _logsumexp_rows(s12)
    l_inter = float((lse12 - np.diag(s12)).mean())
    g12 = (p12 - np.eye(n)) / (n * tau)

    l_intra = 0.0
    d_n1 = g12 @ n2
    d_n2 = g12.T @ n1
    for n_hat, assign in ((n1, 0), (n2, 1)):
        s_kk = (n_hat @ n_hat.T) / tau
        np.fill_diagonal(s_kk, -np.inf)
        lse_k, w_k = _logsumexp_rows(s_kk)
        l_intra += float(lse_k.sum())
        g_k = w_k / (2.0 * n * tau)
        contribution = (g_k + g_k.T) @ n_hat
        if assign == 0:
            d_n1 = d_n1 + contribution
        else:
            d_n2 = d_n2 + contribution
    l_intra /= 2.0 * n

    d_e1 = _normalize_rows_backward(d_n1, n1, norms1, safe1)
    d_e2 = _normalize_rows_backward(d_n2, n2, norms2, safe2)
    return (l_inter, l_intra, l_inter + l_intra), d_e1, d_e2


def info_nce(e1: np.ndarray, e2: np.ndarray, tau: float) -> tuple[float, float, float]:
    """Inter-view, intra-view and total InfoNCE loss values."""
    losses, _, _ = info_nce_with_grads(e1, e2, tau)
    return losses


# ---------------------------------------------------------------------------
# optimizer


def adam_init(params: ModelParams) -> dict:
    return {
        "step": 0,
        "m": {k: np.zeros_like(v) for k, v in params.tensors().items()},
        "v": {k: np.zeros_like(v) for k, v in params.tensors().items()},
    }


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: dict,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place Adam update with bias correction.

    Aborts with a diagnostic naming the tensor if any gradient entry is
    non-finite.
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient in tensor {name!r}")
    state["step"] += 1
    t = state["step"]
    scale1 = 1.0 - beta1**t
    scale2 = 1.0 - beta2**t
    for name, tensor in params.tensors().items():
        g = grads[name]
        m = state["m"][name]
        v = state["v"][name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        tensor -= lr * (m / scale1) / (np.sqrt(v / scale2) + eps)


# ---------------------------------------------------------------------------
# view construction and the full forward/backward pass


@dataclass
class _StructuralViews:
    """Per-epoch fixed inputs: two operators and two path sets."""

    prop1: np.ndarray
    prop2: np.ndarray
    paths1: list[list[int]]
    paths2: list[list[int]]
    provenance: tuple[dict, dict]


def _structural_views(
    g: Digraph,
    cfg: TrainConfig,
    epoch_seed: int,
    cf: ChargeField | None = None,
    node_keys=None,
) -> _StructuralViews:
    if cf is None:
        cf = personalized_charge(g, cfg.q0, smoothing=cfg.uncertainty_smoothing)
    a_s, d_s = symmetrize(g)
    theta_base = build_phase(g, dict(cf.q_star))
    prop1 = build_propagation(a_s, d_s, theta_base)

    spec = PerturbationSpec(r=cfg.r, delta_q_max=cfg.delta_q_max, seed=epoch_seed)
    phi = sample_perturbed_factor(cf, spec, node_keys=node_keys)
    prop2 = build_propagation(a_s, d_s, build_phase(g, phi))

    p_local, p_deep = sample_path_views(
        g,
        cfg.bfs_params(),
        cfg.dfs_params(),
        seed=epoch_seed,
        node_keys=node_keys,
        directed=not cfg.undirected_walks,
    )
    if cfg.view_pairing == "straight":
        paths1, paths2 = p_local, p_deep
    else:
        paths1, paths2 = p_deep, p_local
    provenance = (
        {"laplacian": "personalized", "paths": paths1.mode},
        {"laplacian": "perturbed", "paths": paths2.mode,
         "r": cfg.r, "delta_q_max": cfg.delta_q_max, "epoch_seed": epoch_seed},
    )
    return _StructuralViews(
        prop1=prop1, prop2=prop2,
        paths1=paths1.paths, paths2=paths2.paths,
        provenance=provenance,
    )


def _view_forward(params: ModelParams, prop, paths, x, cfg: TrainConfig):
    x_l = propagate(prop, ComplexFeatures.from_real(x), cfg.n_layers, cfg.cross_terms)
    z = np.hstack([x_l.real, x_l.imag])
    ne, readout_cache = _mlp_forward(
        params.readout_w1, params.readout_b1,
        params.readout_w2, params.readout_b2, z,
    )
    pe, gru_caches = _encode_paths_forward(params, paths, x)
    fused = np.hstack([ne, pe])
    e, proj_cache = _mlp_forward(
        params.proj_w1, params.proj_b1, params.proj_w2, params.proj_b2, fused
    )
    return e, (readout_cache, gru_caches, proj_cache, ne.shape[1])


def _view_backward(params: ModelParams, cache, d_e, grads) -> None:
    readout_cache, gru_caches, proj_cache, ne_width = cache
    d_w1, d_b1, d_w2, d_b2, d_fused = _mlp_backward(
        params.proj_w1, params.proj_w2, proj_cache, d_e
    )
    grads["proj_w1"] += d_w1
    grads["proj_b1"] += d_b1
    grads["proj_w2"] += d_w2
    grads["proj_b2"] += d_b2
    d_ne, d_pe = d_fused[:, :ne_width], d_fused[:, ne_width:]
    d_w1, d_b1, d_w2, d_b2, _ = _mlp_backward(
        params.readout_w1, params.readout_w2, readout_cache, d_ne
    )
    grads["readout_w1"] += d_w1
    grads["readout_b1"] += d_b1
    grads["readout_w2"] += d_w2
    grads["readout_b2"] += d_b2
    _encode_paths_backward(params, gru_caches, d_pe, grads)


def build_views(
    g: Digraph,
    x: np.ndarray,
    params: ModelParams,
    cfg: TrainConfig,
    epoch_seed: int,
    node_keys=None,
) -> ViewPair:
    """Encode both views for one epoch seed.

    View 1 pairs the unperturbed personalized operator with local-mode
    walks; view 2 pairs a freshly perturbed operator with deep-mode
    walks (swapped when ``view_pairing='crossed'``).  Deterministic per
    ``epoch_seed``.
    """
    views = _structural_views(g, cfg, epoch_seed, node_keys=node_keys)
    e1, _ = _view_forward(params, views.prop1, views.paths1, x, cfg)
    e2, _ = _view_forward(params, views.prop2, views.paths2, x, cfg)
    return ViewPair(e1=e1, e2=e2, provenance=views.provenance)


def loss_and_grad(
    params: ModelParams, views: _StructuralViews, x: np.ndarray, cfg: TrainConfig
):
    """Forward both views, evaluate the loss, and backpropagate into
    every parameter tensor (the encoder is shared, so both views
    accumulate into the same buffers)."""
    e1, cache1 = _view_forward(params, views.prop1, views.paths1, x, cfg)
    e2, cache2 = _view_forward(params, views.prop2, views.paths2, x, cfg)
    losses, d_e1, d_e2 = info_nce_with_grads(e1, e2, cfg.tau)
    grads = zero_gradients(params)
    _view_backward(params, cache1, d_e1, grads)
    _view_backward(params, cache2, d_e2, grads)
    return losses, grads


def train(
    g: Digraph, x: np.ndarray, cfg: TrainConfig
) -> tuple[ModelParams, list[dict]]:
    """Contrastive training loop.

    Per epoch: resample the perturbed operator and both path sets,
    forward both views, backpropagate the InfoNCE loss, and apply one
    Adam step.  Returns the final parameters and a per-epoch trace of
    ``epoch, l_inter, l_intra, l_total, wall_ms``.  Fully deterministic
    for a given config (timing aside).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != g.n:
        raise ValueError(f"feature rows {x.shape[0]} != node count {g.n}")
    params = init_model_params(
        x.shape[1], d_emb=cfg.d_emb, hidden=cfg.mlp_hidden, seed=cfg.seed
    )
    state = adam_init(params)
    cf = personalized_charge(g, cfg.q0, smoothing=cfg.uncertainty_smoothing)
    trace: list[dict] = []
    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        epoch_seed = derive_int(cfg.seed, "epoch", epoch)
        views = _structural_views(g, cfg, epoch_seed, cf=cf)
        (l_inter, l_intra, l_total), grads = loss_and_grad(params, views, x, cfg)
        if not np.isfinite(l_total):
            raise TrainingDiverged(epoch, f"loss is non-finite ({l_total})")
        try:
            adam_step(params, grads, state, cfg.learning_rate)
        except FloatingPointError as err:
            raise TrainingDiverged(epoch, str(err)) from err
        trace.append(
            {
                "epoch": epoch,
                "l_inter": l_inter,
                "l_intra": l_intra,
                "l_total": l_total,
                "wall_ms": (time.perf_counter() - started) * 1e3,
            }
        )
    return params, trace


def embed(
    g: Digraph, x: np.ndarray, params: ModelParams, cfg: TrainConfig, seed: int | None = None
) -> np.ndarray:
    """Deterministic inference embedding: the anchor view (unperturbed
    operator plus local-mode walks) under a fixed evaluation seed."""
    eval_seed = derive_int(cfg.seed if seed is None else seed, "eval")
    views = _structural_views(g, cfg, eval_seed)
    e1, _ = _view_forward(params, views.prop1, views.paths1, np.asarray(x, float), cfg)
    return e1


def save_trace(trace: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "L_inter", "L_intra", "L_total", "wall_ms"])
        for row in trace:
            writer.writerow(
                [
                    row["epoch"],
                    f"{row['l_inter']:.17g}",
                    f"{row['l_intra']:.17g}",
                    f"{row['l_total']:.17g}",
                    f"{row['wall_ms']:.3f}",
                ]
            )


def load_trace(path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for record in csv.DictReader(fh):
            rows.append(
                {
                    "epoch": int(record["epoch"]),
                    "l_inter": float(record["L_inter"]),
                    "l_intra": float(record["L_intra"]),
                    "l_total": float(record["L_total"]),
                    "wall_ms": float(record["wall_ms"]),
                }
            )
    return rows
