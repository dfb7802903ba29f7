"""Trainable components with hand-written reverse-mode gradients.

Three parameterized blocks: an MLP readout over flattened complex
node features, a GRU that folds a node's sampled path into one hidden
state, and a projection head over the fused embedding.  Propagation
through the graph operator itself is parameter free.  Every block
exposes the forward pass plus an explicit backward pass that fills
plain numpy gradient buffers; no autodiff anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .magnetic import check_hermitian
from .seeding import stream

__all__ = [
    "ComplexFeatures",
    "ModelParams",
    "param_shapes",
    "init_model_params",
    "zero_gradients",
    "build_propagation",
    "propagate",
    "node_readout",
    "gru_step",
    "encode_paths",
    "fuse_project",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1


@dataclass
class ComplexFeatures:
    """Real/imaginary channel pair of an ``(n, d)`` feature matrix."""

    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ValueError(
                f"channel shapes differ: {self.real.shape} vs {self.imag.shape}"
            )

    @classmethod
    def from_real(cls, x: np.ndarray) -> "ComplexFeatures":
        x = np.asarray(x, dtype=np.float64)
        return cls(real=x.copy(), imag=x.copy())


@dataclass
class ModelParams:
    """All trainable tensors: readout MLP, GRU cell, projection head."""

    readout_w1: np.ndarray
    readout_b1: np.ndarray
    readout_w2: np.ndarray
    readout_b2: np.ndarray
    gru_wz: np.ndarray
    gru_wr: np.ndarray
    gru_wh: np.ndarray
    proj_w1: np.ndarray
    proj_b1: np.ndarray
    proj_w2: np.ndarray
    proj_b2: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.tensors().items()})

    @property
    def d_emb(self) -> int:
        return self.proj_w2.shape[0]


def param_shapes(d_in: int, d_emb: int, hidden: int) -> dict[str, tuple[int, ...]]:
    return {
        "readout_w1": (hidden, 2 * d_in),
        "readout_b1": (hidden,),
        "readout_w2": (d_emb, hidden),
        "readout_b2": (d_emb,),
        "gru_wz": (d_emb, d_emb + d_in),
        "gru_wr": (d_emb, d_emb + d_in),
        "gru_wh": (d_emb, d_emb + d_in),
        "proj_w1": (d_emb, 2 * d_emb),
        "proj_b1": (d_emb,),
        "proj_w2": (d_emb, d_emb),
        "proj_b2": (d_emb,),
    }


def init_model_params(
    d_in: int, d_emb: int = 64, hidden: int = 128, seed: int = 0
) -> ModelParams:
    """Seeded uniform init in ``[-1/sqrt(fan_in), +1/sqrt(fan_in)]``."""
    rng = stream(seed, "init")
    fan_in = {
        "readout_w1": 2 * d_in, "readout_b1": 2 * d_in,
        "readout_w2": hidden, "readout_b2": hidden,
        "gru_wz": d_emb + d_in, "gru_wr": d_emb + d_in, "gru_wh": d_emb + d_in,
        "proj_w1": 2 * d_emb, "proj_b1": 2 * d_emb,
        "proj_w2": d_emb, "proj_b2": d_emb,
    }
    tensors = {}
    for name, shape in param_shapes(d_in, d_emb, hidden).items():
        bound = 1.0 / np.sqrt(fan_in[name])
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(**tensors)


def zero_gradients(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors().items()}


# ---------------------------------------------------------------------------
# parameter-free complex propagation


def build_propagation(
    a_s: np.ndarray, d_s: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """Degree-normalized Hermitian propagation operator.

    Self-loops are added before normalization (their phase is 1 because
    the phase matrix has a zero diagonal), which also floors every
    degree at 1, so isolated nodes propagate to themselves.
    """
    a_tilde = a_s + np.eye(a_s.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    normalized = a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]
    return check_hermitian(normalized * np.exp(1j * theta))


def propagate(
    p: np.ndarray,
    x: ComplexFeatures,
    n_layers: int,
    cross_terms: bool = True,
) -> ComplexFeatures:
    """Apply the complex operator ``n_layers`` times.

    Full complex arithmetic mixes the channels each layer:
    ``real' = Re(P) real - Im(P) imag`` and
    ``imag' = Re(P) imag + Im(P) real``.  With ``cross_terms=False``
    each channel is propagated independently and keeps only its own
    component (``real' = Re(P) real``, ``imag' = Im(P) imag``), a
    comparison variant.
    """
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    if p.shape[0] != x.real.shape[0]:
        raise ValueError(
            f"operator order {p.shape[0]} does not match {x.real.shape[0]} feature rows"
        )
    # .real/.imag of a complex array are strided views; BLAS needs
    # contiguous operands to run at full speed
    p_re = np.ascontiguousarray(p.real)
    p_im = np.ascontiguousarray(p.imag)
    real, imag = x.real, x.imag
    for _ in range(n_layers):
        if cross_terms:
            real, imag = p_re @ real - p_im @ imag, p_re @ imag + p_im @ real
        else:
            real, imag = p_re @ real, p_im @ imag
    return ComplexFeatures(real=real, imag=imag)


# ---------------------------------------------------------------------------
# two-layer MLP (shared by readout and projection head)


def _activate(a: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(a)
    if activation == "identity":
        return a
    raise ValueError(f"unknown activation {activation!r}")


def _mlp_forward(w1, b1, w2, b2, z, activation="tanh"):
    a1 = z @ w1.T + b1
    h1 = _activate(a1, activation)
    out = h1 @ w2.T + b2
    return out, (z, h1, activation)


def _mlp_backward(w1, w2, cache, d_out):
    z, h1, activation = cache
    d_w2 = d_out.T @ h1
    d_b2 = d_out.sum(axis=0)
    d_h1 = d_out @ w2
    d_a1 = d_h1 * (1.0 - h1 * h1) if activation == "tanh" else d_h1
    d_w1 = d_a1.T @ z
    d_b1 = d_a1.sum(axis=0)
    d_z = d_a1 @ w1
    return d_w1, d_b1, d_w2, d_b2, d_z


def node_readout(
    params: ModelParams, x: ComplexFeatures, activation: str = "tanh"
) -> np.ndarray:
    """Row-wise MLP over the concatenated real and imaginary channels."""
    z = np.hstack([x.real, x.imag])
    if z.shape[1] != params.readout_w1.shape[1]:
        raise ValueError(
            f"readout expects width {params.readout_w1.shape[1]}, got {z.shape[1]}"
        )
    out, _ = _mlp_forward(
        params.readout_w1, params.readout_b1,
        params.readout_w2, params.readout_b2,
        z, activation,
    )
    return out


def fuse_project(
    params: ModelParams, ne: np.ndarray, pe: np.ndarray, activation: str = "tanh"
) -> np.ndarray:
    """Project the concatenated node and path embeddings into the
    shared contrastive space."""
    f = np.hstack([ne, pe])
    if f.shape[1] != params.proj_w1.shape[1]:
        raise ValueError(
            f"projection expects width {params.proj_w1.shape[1]}, got {f.shape[1]}"
        )
    out, _ = _mlp_forward(
        params.proj_w1, params.proj_b1, params.proj_w2, params.proj_b2, f, activation
    )
    return out


# ---------------------------------------------------------------------------
# GRU path aggregation


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow warnings for large negative inputs
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _gru_cell_forward(params: ModelParams, h_prev: np.ndarray, x_t: np.ndarray):
    hidden = params.gru_wz.shape[0]
    u = np.hstack([h_prev, x_t])
    z = _sigmoid(u @ params.gru_wz.T)
    r = _sigmoid(u @ params.gru_wr.T)
    uh = np.hstack([r * h_prev, x_t])
    hh = np.tanh(uh @ params.gru_wh.T)
    h = (1.0 - z) * h_prev + z * hh
    return h, (u, uh, z, r, hh, h_prev, hidden)


def _gru_cell_backward(params: ModelParams, cache, d_h, grads):
    u, uh, z, r, hh, h_prev, hidden = cache
    d_z = d_h * (hh - h_prev)
    d_hh = d_h * z
    d_h_prev = d_h * (1.0 - z)
    d_ah = d_hh * (1.0 - hh * hh)
    grads["gru_wh"] += d_ah.T @ uh
    d_uh = d_ah @ params.gru_wh
    d_rh = d_uh[:, :hidden]
    d_r = d_rh * h_prev
    d_h_prev = d_h_prev + d_rh * r
    d_az = d_z * z * (1.0 - z)
    grads["gru_wz"] += d_az.T @ u
    d_h_prev = d_h_prev + d_az @ params.gru_wz[:, :hidden]
    d_ar = d_r * r * (1.0 - r)
    grads["gru_wr"] += d_ar.T @ u
    d_h_prev = d_h_prev + d_ar @ params.gru_wr[:, :hidden]
    return d_h_prev


def gru_step(params: ModelParams, h_prev: np.ndarray, x_t: np.ndarray) -> np.ndarray:
    """One bias-free GRU update: gates ``z`` and ``r`` over
    ``[h_prev, x]``, candidate ``tanh(W_h [r*h_prev, x])``, then the
    convex blend ``(1-z)*h_prev + z*candidate``."""
    h, _ = _gru_cell_forward(params, h_prev[None, :], x_t[None, :])
    return h[0]


def _encode_paths_forward(params: ModelParams, paths: list[list[int]], x: np.ndarray):
    n = len(paths)
    hidden = params.gru_wz.shape[0]
    h = np.zeros((n, hidden))
    max_len = max((len(p) for p in paths), default=0)
    caches = []
    for t in range(max_len):
        idx = np.array([i for i, p in enumerate(paths) if len(p) > t], dtype=np.intp)
        nodes = [paths[i][t] for i in idx]
        h_step, cache = _gru_cell_forward(params, h[idx], x[nodes])
        h[idx] = h_step
        caches.append((idx, cache))
    return h, caches


def _encode_paths_backward(params: ModelParams, caches, d_pe, grads):
    d_h = d_pe.copy()
    for idx, cache in reversed(caches):
        d_h[idx] = _gru_cell_backward(params, cache, d_h[idx], grads)


def encode_paths(params: ModelParams, paths, x: np.ndarray) -> np.ndarray:
    """Fold each node's path into the GRU's final hidden state.

    ``paths`` is a PathSet or a raw list of node-id sequences; inputs
    are the raw feature rows of the visited nodes and the initial
    hidden state is zero.  Row ``i`` of the result encodes path ``i``.
    """
    raw = paths.paths if hasattr(paths, "paths") else paths
    n_features = x.shape[0]
    for p in raw:
        if any(not 0 <= v < n_features for v in p):
            raise ValueError("path references a node id outside the feature matrix")
    pe, _ = _encode_paths_forward(params, raw, x)
    return pe


# ---------------------------------------------------------------------------
# finite-difference gradient checking


def gradient_check(
    params: ModelParams,
    loss_fn,
    analytic: dict[str, np.ndarray],
    eps: float = 1e-6,
) -> float:
    """Largest relative disagreement between ``analytic`` gradients and
    central finite differences of ``loss_fn(params)``.

    Every element of every tensor is perturbed, so keep the instance
    small.  The per-element error is ``|a - n| / max(1, |a|, |n|)``.
    """
    worst = 0.0
    for name, tensor in params.tensors().items():
        grad = analytic[name]
        flat = tensor.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.shape[0]):
            saved = flat[i]
            flat[i] = saved + eps
            upper = loss_fn(params)
            flat[i] = saved - eps
            lower = loss_fn(params)
            flat[i] = saved
            numeric = (upper - lower) / (2.0 * eps)
            denom = max(1.0, abs(numeric), abs(float(flat_grad[i])))
            worst = max(worst, abs(numeric - float(flat_grad[i])) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: ModelParams, config: dict) -> None:
    """Versioned JSON tensor dump plus the run configuration."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": config,
        "tensors": {
            name: {"shape": list(t.shape), "data": t.reshape(-1).tolist()}
            for name, t in params.tensors().items()
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Load a checkpoint and validate tensor shapes against its config."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    config = payload["config"]
    expected = param_shapes(
        int(config["d_in"]), int(config["d_emb"]), int(config["mlp_hidden"])
    )
    tensors = {}
    for name, shape in expected.items():
        entry = payload["tensors"].get(name)
        if entry is None:
            raise ValueError(f"checkpoint is missing tensor {name!r}")
        if tuple(entry["shape"]) != shape:
            raise ValueError(
                f"tensor {name!r} has shape {tuple(entry['shape'])}, expected {shape}"
            )
        tensors[name] = np.asarray(entry["data"], dtype=np.float64).reshape(shape)
    return ModelParams(**tensors), config
