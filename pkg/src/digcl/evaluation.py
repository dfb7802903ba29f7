"""Frozen-embedding downstream evaluation.

Embeddings are never updated here: a logistic-regression probe is fit
on top of fixed node embeddings for classification, and on ordered
pair features ``[E_u || E_v]`` for the two link tasks (does an edge
exist; which way does it point).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .digraph import EdgeSplit

__all__ = [
    "ProbeResult",
    "LinkTaskSpec",
    "linear_probe",
    "link_eval",
]


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    iterations: int,
    lr: float,
    l2: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Multinomial logistic regression by full-batch gradient descent.

    Weights start at zero and the intercept is unregularized, so the
    fit is deterministic for fixed inputs.
    """
    n, d = x.shape
    w = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(iterations):
        p = _softmax_rows(x @ w.T + b)
        g = (p - onehot) / n
        w -= lr * (g.T @ x + l2 * w)
        b -= lr * g.sum(axis=0)
    return w, b


@dataclass
class ProbeResult:
    """Linear-probe outcome with per-class diagnostics."""

    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    seed: int
    n_train: int
    n_test: int


def linear_probe(
    embeddings: np.ndarray,
    labels: np.ndarray,
    train_mask: np.ndarray,
    test_mask: np.ndarray,
    seed: int = 0,
    iterations: int = 500,
    lr: float = 0.1,
    l2: float = 1e-4,
) -> ProbeResult:
    """Fit a logistic-regression classifier on frozen embeddings over
    the train mask and score accuracy on the test mask.

    Every class must appear in the training mask.  Deterministic for
    fixed inputs; ``seed`` is recorded for bookkeeping.
    """
    labels = np.asarray(labels, dtype=np.int64)
    train_mask = np.asarray(train_mask, dtype=bool)
    test_mask = np.asarray(test_mask, dtype=bool)
    if train_mask.shape != test_mask.shape or train_mask.shape[0] != embeddings.shape[0]:
        raise ValueError("mask shapes must match the embedding row count")
    if np.any(train_mask & test_mask):
        raise ValueError("train and test masks overlap")
    n_classes = int(labels.max()) + 1
    present = np.unique(labels[train_mask])
    missing = sorted(set(range(n_classes)) - set(present.tolist()))
    if missing:
        raise ValueError(f"classes absent from the training mask: {missing}")

    w, b = _fit_logistic(
        embeddings[train_mask], labels[train_mask], n_classes, iterations, lr, l2
    )
    predicted = np.argmax(embeddings[test_mask] @ w.T + b, axis=1)
    actual = labels[test_mask]
    accuracy = float((predicted == actual).mean())
    precision = np.zeros(n_classes)
    recall = np.zeros(n_classes)
    for c in range(n_classes):
        hits = float(((predicted == c) & (actual == c)).sum())
        claimed = float((predicted == c).sum())
        truly = float((actual == c).sum())
        precision[c] = hits / claimed if claimed else 0.0
        recall[c] = hits / truly if truly else 0.0
    return ProbeResult(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        seed=seed,
        n_train=int(train_mask.sum()),
        n_test=int(test_mask.sum()),
    )


@dataclass
class LinkTaskSpec:
    """One link-prediction task over an edge split.

    ``existence`` scores true edges against sampled non-edges;
    ``direction`` scores the orientation of true edges, presenting each
    edge in both orders.  The classifier fits on the train part and is
    scored on ``eval_part``.
    """

    task: str
    split: EdgeSplit
    eval_part: str = "test"
    iterations: int = 500
    lr: float = 0.1
    l2: float = 1e-4

    def __post_init__(self):
        if self.task not in ("existence", "direction"):
            raise ValueError(f"task must be 'existence' or 'direction', got {self.task!r}")
        if self.eval_part not in ("train", "valid", "test"):
            raise ValueError(f"eval_part must be train/valid/test, got {self.eval_part!r}")


def _pair_features(embeddings: np.ndarray, pairs) -> np.ndarray:
    idx = np.asarray(pairs, dtype=np.int64)
    return np.hstack([embeddings[idx[:, 0]], embeddings[idx[:, 1]]])


def _task_samples(task: str, positives, negatives):
    if task == "existence":
        pairs = list(positives) + list(negatives)
        labels = [1] * len(positives) + [0] * len(negatives)
    else:
        pairs = [(u, v) for u, v in positives] + [(v, u) for u, v in positives]
        labels = [1] * len(positives) + [0] * len(positives)
    return pairs, np.asarray(labels, dtype=np.int64)


def link_eval(embeddings: np.ndarray, spec: LinkTaskSpec) -> float:
    """Accuracy of a logistic classifier over ordered pair features
    ``[E_u || E_v]`` for the configured link task."""
    split = spec.split
    train_pairs, train_labels = _task_samples(spec.task, split.train, split.train_neg)
    eval_pos = getattr(split, spec.eval_part)
    eval_neg = getattr(split, spec.eval_part + "_neg")
    eval_pairs, eval_labels = _task_samples(spec.task, eval_pos, eval_neg)
    if not train_pairs or not eval_pairs:
        raise ValueError(f"empty split part for link task {spec.task!r}")
    w, b = _fit_logistic(
        _pair_features(embeddings, train_pairs),
        train_labels,
        2,
        spec.iterations,
        spec.lr,
        spec.l2,
    )
    logits = _pair_features(embeddings, eval_pairs) @ w.T + b
    predicted = np.argmax(logits, axis=1)
    return float((predicted == eval_labels).mean())
