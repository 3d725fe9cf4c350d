"""Similarity-head training: ranking and contrastive objectives over frozen
backend embeddings.

A linear projection head is trained with plain gradient descent to minimize
the multiple negatives ranking loss (on score-1.0 pairs, other in-batch
positives acting as negatives) plus an online contrastive loss (on
binarized pairs, margin on cosine distance). Both losses expose analytic
gradients, checked against central finite differences.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .pairgen import ScoredPair

__all__ = [
    "ProjectionHead",
    "TrainConfig",
    "EpochTrace",
    "project",
    "project_batch",
    "mnr_loss",
    "contrastive_loss",
    "binarize",
    "train",
    "grad_check",
    "ProjectionHeadTrainer",
    "save_head",
    "load_head",
    "save_trace",
]


@dataclass
class ProjectionHead:
    """Linear map (out_dim x in_dim) applied to backend vectors, then L2."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("head weights must be a matrix")
        if self.out_dim > self.in_dim:
            raise ValueError(f"out_dim {self.out_dim} exceeds in_dim {self.in_dim}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("head weights must be finite")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


def project(head: ProjectionHead, v: np.ndarray) -> np.ndarray:
    """w @ v, L2-normalized. Zero output (incl. zero input) is an error."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (head.in_dim,):
        raise ValueError(f"expected vector of dim {head.in_dim}, got shape {v.shape}")
    z = head.weights @ v
    norm = np.linalg.norm(z)
    if norm == 0.0:
        raise ValueError("projection produced a zero vector; cannot normalize")
    return z / norm


def project_batch(head: ProjectionHead, vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    z = vectors @ head.weights.T
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"projection produced a zero vector at row {bad}")
    return z / norms[:, None]


def _unit_rows(X: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"{what} row {bad} is a zero vector")
    return X / norms[:, None], norms


def mnr_loss(
    anchors: np.ndarray,
    positives: np.ndarray,
    scale: float = 20.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Softmax ranking loss over in-batch anchor/positive cosine similarities.

    loss = -(1/B) sum_i log softmax_j(scale * cos(a_i, p_j))[i]; the other
    anchors' positives are the negatives of row i. Returns the loss and its
    gradients w.r.t. the raw anchor and positive vectors (cosine, and hence
    the internal normalization, is differentiated through).
    """
    A = np.asarray(anchors, dtype=np.float64)
    P = np.asarray(positives, dtype=np.float64)
    if A.shape != P.shape or A.ndim != 2 or A.shape[0] < 1:
        raise ValueError("anchors and positives must be equal-shaped (B, d) with B >= 1")
    B = A.shape[0]
    A_hat, a_norms = _unit_rows(A, "anchor")
    P_hat, p_norms = _unit_rows(P, "positive")

    C = A_hat @ P_hat.T
    S = scale * C
    row_max = S.max(axis=1, keepdims=True)
    lse = row_max[:, 0] + np.log(np.exp(S - row_max).sum(axis=1))
    loss = float(np.mean(lse - np.diag(S)))

    softmax = np.exp(S - lse[:, None])
    G = (softmax - np.eye(B)) * (scale / B)  # dloss/dC
    row_dot = np.sum(G * C, axis=1)
    grad_a = (G @ P_hat - row_dot[:, None] * A_hat) / a_norms[:, None]
    col_dot = np.sum(G * C, axis=0)
    grad_p = (G.T @ A_hat - col_dot[:, None] * P_hat) / p_norms[:, None]
    return loss, grad_a, grad_p


def contrastive_loss(
    left: np.ndarray,
    right: np.ndarray,
    labels: Sequence[int],
    margin: float = 0.5,
    online: bool = False,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Margin contrastive loss on cosine distance d = 1 - cos(u, v).

    Per pair: label*d^2 + (1-label)*max(0, margin-d)^2, averaged over the
    contributing pairs. With ``online`` set, only hard pairs contribute:
    positives farther than the closest negative and negatives closer than
    the farthest positive; a single-class batch falls back to all its pairs.
    """
    U = np.asarray(left, dtype=np.float64)
    V = np.asarray(right, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if U.shape != V.shape or U.ndim != 2 or U.shape[0] != y.shape[0]:
        raise ValueError("left/right must be (B, d) arrays aligned with labels")
    B = U.shape[0]
    U_hat, u_norms = _unit_rows(U, "left")
    V_hat, v_norms = _unit_rows(V, "right")

    cos = np.sum(U_hat * V_hat, axis=1)
    d = 1.0 - cos
    pos = y == 1
    neg = ~pos
    slack = np.maximum(0.0, margin - d)
    raw = np.where(pos, d**2, slack**2)

    if online and pos.any() and neg.any():
        contribute = np.zeros(B, dtype=bool)
        contribute[pos] = d[pos] > d[neg].min()
        contribute[neg] = d[neg] < d[pos].max()
    else:
        contribute = np.ones(B, dtype=bool)

    n_c = int(contribute.sum())
    if n_c == 0:
        return 0.0, np.zeros_like(U), np.zeros_like(V)
    loss = float(raw[contribute].sum() / n_c)

    dl_dd = np.zeros(B, dtype=np.float64)
    active_pos = contribute & pos
    active_neg = contribute & neg & (slack > 0.0)
    dl_dd[active_pos] = 2.0 * d[active_pos]
    dl_dd[active_neg] = -2.0 * slack[active_neg]
    dl_dd /= n_c

    # dd/du = -(v_hat - cos * u_hat) / |u|
    grad_u = -dl_dd[:, None] * (V_hat - cos[:, None] * U_hat) / u_norms[:, None]
    grad_v = -dl_dd[:, None] * (U_hat - cos[:, None] * V_hat) / v_norms[:, None]
    return loss, grad_u, grad_v


def binarize(pairs: Sequence[ScoredPair], threshold: float = 0.5) -> list[tuple[str, str, int]]:
    """Graded pairs to binary: 1 iff score >= threshold."""
    return [(p.anchor, p.other, int(p.score >= threshold)) for p in pairs]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-5
    epochs: int = 25
    batch_size: int = 20
    margin: float = 0.5
    mnrl_scale: float = 20.0
    binary_threshold: float = 0.5
    seed: int = 0
    head_dim: int | None = None
    init_noise: float = 1e-3

    def __post_init__(self) -> None:
        if not 0.0 < self.margin <= 2.0:
            raise ValueError(f"margin must be in (0, 2], got {self.margin}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 for the ranking loss")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass(frozen=True)
class EpochTrace:
    epoch: int
    mnrl: float
    contrastive: float
    total: float


def train(
    pairs: Sequence[ScoredPair],
    backend,
    cfg: TrainConfig,
) -> tuple[ProjectionHead, list[EpochTrace]]:
    """Gradient-descend a projection head on the two objectives.

    Unique pair texts are embedded once; the head starts as the identity
    (leading rows, when head_dim < backend dim) plus small seeded noise.
    Fully deterministic in (pair order, cfg.seed). NaN loss aborts with the
    offending batch index.
    """
    if not pairs:
        raise ValueError("cannot train on an empty pair list")

    texts: list[str] = []
    row_of: dict[str, int] = {}
    for p in pairs:
        for text in (p.anchor, p.other):
            if text not in row_of:
                row_of[text] = len(texts)
                texts.append(text)
    V = np.asarray(backend.embed_batch(texts), dtype=np.float64)
    zero_rows = np.flatnonzero(np.linalg.norm(V, axis=1) == 0.0)
    if zero_rows.size:
        raise ValueError(f"pair text embeds to a zero vector: {texts[int(zero_rows[0])]!r}")

    in_dim = V.shape[1]
    out_dim = cfg.head_dim or in_dim
    if out_dim > in_dim:
        raise ValueError(f"head_dim {out_dim} exceeds backend dim {in_dim}")
    rng = np.random.default_rng(cfg.seed)
    W = np.eye(out_dim, in_dim) + cfg.init_noise * rng.standard_normal((out_dim, in_dim))

    rows_a = np.array([row_of[p.anchor] for p in pairs])
    rows_o = np.array([row_of[p.other] for p in pairs])
    scores = np.array([p.score for p in pairs])
    labels = (scores >= cfg.binary_threshold).astype(np.int64)
    n = len(pairs)

    # One seeded shuffle; batch composition stays fixed across epochs so the
    # per-epoch losses are comparable (the ranking loss depends on in-batch
    # negatives, so reshuffling would make the trace non-monotone by design).
    order = rng.permutation(n)

    trace: list[EpochTrace] = []
    for epoch in range(cfg.epochs):
        mnrl_sum = 0.0
        contrastive_sum = 0.0
        n_batches = 0
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            ra, ro = rows_a[idx], rows_o[idx]
            Za = V[ra] @ W.T
            Zo = V[ro] @ W.T

            dW = np.zeros_like(W)
            batch_mnrl = 0.0
            pos = scores[idx] == 1.0
            if pos.any():
                batch_mnrl, ga, gp = mnr_loss(Za[pos], Zo[pos], cfg.mnrl_scale)
                dW += ga.T @ V[ra[pos]]
                dW += gp.T @ V[ro[pos]]
            batch_con, gu, gv = contrastive_loss(Za, Zo, labels[idx], cfg.margin, online=True)
            dW += gu.T @ V[ra]
            dW += gv.T @ V[ro]

            total = batch_mnrl + batch_con
            if not np.isfinite(total):
                raise RuntimeError(f"non-finite loss in epoch {epoch}, batch {batch_index}")
            W -= cfg.learning_rate * dW
            mnrl_sum += batch_mnrl
            contrastive_sum += batch_con
            n_batches += 1
        mnrl = mnrl_sum / n_batches
        con = contrastive_sum / n_batches
        trace.append(EpochTrace(epoch=epoch, mnrl=mnrl, contrastive=con, total=mnrl + con))
    return ProjectionHead(weights=W), trace


def grad_check(
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    epsilon: float = 1e-5,
    num_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error of analytic vs central finite-difference gradient.

    Checks every coordinate, or a seeded random subset of at least 100 when
    ``num_coords`` is given. Error metric: |g_a - g_f| / max(1e-8, |g_a| + |g_f|).
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-7, 1e-3], got {epsilon}")
    x0 = np.asarray(point, dtype=np.float64).ravel()
    _, grad = loss_fn(x0.copy())
    grad = np.asarray(grad, dtype=np.float64).ravel()
    if grad.shape != x0.shape:
        raise ValueError("loss_fn gradient shape disagrees with the point")

    size = x0.size
    if num_coords is None or max(100, num_coords) >= size:
        coords = np.arange(size)
    else:
        coords = np.random.default_rng(seed).choice(size, size=max(100, num_coords), replace=False)

    max_err = 0.0
    for i in coords:
        xp = x0.copy()
        xp[i] += epsilon
        xm = x0.copy()
        xm[i] -= epsilon
        fd = (loss_fn(xp)[0] - loss_fn(xm)[0]) / (2.0 * epsilon)
        err = abs(grad[i] - fd) / max(1e-8, abs(grad[i]) + abs(fd))
        max_err = max(max_err, err)
    return max_err


class ProjectionHeadTrainer(BaseEstimator):
    """Estimator facade over :func:`train`: fit on pairs, transform vectors."""

    def __init__(
        self,
        backend=None,
        learning_rate: float = 2e-5,
        epochs: int = 25,
        batch_size: int = 20,
        margin: float = 0.5,
        mnrl_scale: float = 20.0,
        binary_threshold: float = 0.5,
        seed: int = 0,
        head_dim: int | None = None,
        init_noise: float = 1e-3,
    ):
        self.backend = backend
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.margin = margin
        self.mnrl_scale = mnrl_scale
        self.binary_threshold = binary_threshold
        self.seed = seed
        self.head_dim = head_dim
        self.init_noise = init_noise

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            margin=self.margin,
            mnrl_scale=self.mnrl_scale,
            binary_threshold=self.binary_threshold,
            seed=self.seed,
            head_dim=self.head_dim,
            init_noise=self.init_noise,
        )

    def fit(self, pairs: Sequence[ScoredPair], y=None) -> "ProjectionHeadTrainer":
        if self.backend is None:
            raise ValueError("ProjectionHeadTrainer needs an embedding backend")
        self.head_, self.trace_ = train(pairs, self.backend, self._config())
        return self

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        if not hasattr(self, "head_"):
            raise NotFittedError("ProjectionHeadTrainer must be fit before transform")
        return project_batch(self.head_, vectors)


def save_head(head: ProjectionHead, path: str | Path) -> None:
    doc = {"out_dim": head.out_dim, "in_dim": head.in_dim, "weights": head.weights.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_head(path: str | Path) -> ProjectionHead:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    weights = np.asarray(doc["weights"], dtype=np.float64)
    if weights.shape != (doc["out_dim"], doc["in_dim"]):
        raise ValueError(f"head file {path} dims header disagrees with matrix shape")
    return ProjectionHead(weights=weights)


def save_trace(trace: Sequence[EpochTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mnrl", "contrastive", "total"])
        for row in trace:
            writer.writerow([row.epoch, repr(row.mnrl), repr(row.contrastive), repr(row.total)])
