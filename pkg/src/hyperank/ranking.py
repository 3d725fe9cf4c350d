"""Ranked label predictions and the shared Accuracy / Mean Rank metrics.

Two prediction routes: similarity ranking (cosine between occurrence
vectors and label-definition vectors, optionally through a trained head)
and a softmax classifier over backend embeddings. Both aggregate multiple
occurrences of one term by averaging per-label scores.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import Dataset, LabelCatalog, LabelId
from .embed import cosine
from .simtrain import ProjectionHead, project_batch

__all__ = [
    "RankedPrediction",
    "EvalReport",
    "rank_term",
    "HypernymRanker",
    "SoftmaxTextClassifier",
    "train_softmax_classifier",
    "classify_term",
    "accuracy",
    "mean_rank",
    "save_predictions",
    "load_predictions",
    "save_report",
]


@dataclass(frozen=True)
class RankedPrediction:
    """All catalog labels for one term, best first, with aligned scores."""

    term: str
    ranked_labels: tuple[str, ...]
    scores: tuple[float, ...]


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    mean_rank: float
    n: int


def _ordered_labels(catalog: LabelCatalog) -> list[LabelId]:
    return sorted(catalog.labels(), key=lambda lab: lab.index)


def _mean_sorted(values: list[float]) -> float:
    # Sorted fsum makes occurrence aggregation bitwise order-invariant.
    return math.fsum(sorted(values)) / len(values)


def _nonzero_occurrence_rows(occurrences: Sequence[str], vectors: np.ndarray) -> list[int]:
    rows = []
    for i in range(len(occurrences)):
        if np.linalg.norm(vectors[i]) == 0.0:
            warnings.warn(f"occurrence embeds to a zero vector, skipping: {occurrences[i]!r}")
        else:
            rows.append(i)
    if not rows:
        raise ValueError("every occurrence embedded to a zero vector")
    return rows


def _ranked(term: str, labels: list[LabelId], per_label: list[float]) -> RankedPrediction:
    order = sorted(range(len(labels)), key=lambda i: (-per_label[i], labels[i].index))
    return RankedPrediction(
        term=term,
        ranked_labels=tuple(labels[i].name for i in order),
        scores=tuple(per_label[i] for i in order),
    )


def rank_term(
    term: str,
    occurrences: Sequence[str],
    catalog: LabelCatalog,
    backend,
    head: ProjectionHead | None = None,
) -> RankedPrediction:
    """Similarity ranking of all catalog labels for one term.

    Per-label score is the mean cosine between each usable occurrence and
    the label's definition vector; ties break toward the lower canonical
    label index. Zero-vector occurrences are skipped with a warning.
    """
    if not occurrences:
        raise ValueError("rank_term needs at least one occurrence")
    labels = _ordered_labels(catalog)
    defs = [catalog.definition_of(lab) for lab in labels]
    label_vecs = np.asarray(backend.embed_batch(defs), dtype=np.float64)
    occ_vecs = np.asarray(backend.embed_batch(list(occurrences)), dtype=np.float64)
    rows = _nonzero_occurrence_rows(occurrences, occ_vecs)
    if head is not None:
        label_vecs = project_batch(head, label_vecs)
        occ_vecs = project_batch(head, occ_vecs[rows])
        rows = list(range(len(rows)))
    per_label = [
        _mean_sorted([cosine(occ_vecs[r], label_vecs[j]) for r in rows])
        for j in range(len(labels))
    ]
    return _ranked(term, labels, per_label)


class HypernymRanker(BaseEstimator):
    """Similarity ranker with cached label-definition vectors.

    fit() embeds (and optionally projects) the catalog definitions once;
    predict() ranks a batch of (term, occurrences) items.
    """

    def __init__(self, backend=None, head: ProjectionHead | None = None):
        self.backend = backend
        self.head = head

    def fit(self, catalog: LabelCatalog, y=None) -> "HypernymRanker":
        if self.backend is None:
            raise ValueError("HypernymRanker needs an embedding backend")
        self.labels_ = _ordered_labels(catalog)
        defs = [catalog.definition_of(lab) for lab in self.labels_]
        vecs = np.asarray(self.backend.embed_batch(defs), dtype=np.float64)
        if self.head is not None:
            vecs = project_batch(self.head, vecs)
        self.label_vectors_ = vecs
        return self

    def rank(self, term: str, occurrences: Sequence[str]) -> RankedPrediction:
        if not hasattr(self, "label_vectors_"):
            raise NotFittedError("HypernymRanker must be fit before ranking")
        if not occurrences:
            raise ValueError("rank needs at least one occurrence")
        occ_vecs = np.asarray(self.backend.embed_batch(list(occurrences)), dtype=np.float64)
        rows = _nonzero_occurrence_rows(occurrences, occ_vecs)
        if self.head is not None:
            occ_vecs = project_batch(self.head, occ_vecs[rows])
            rows = list(range(occ_vecs.shape[0]))
        per_label = [
            _mean_sorted([cosine(occ_vecs[r], self.label_vectors_[j]) for r in rows])
            for j in range(len(self.labels_))
        ]
        return _ranked(term, self.labels_, per_label)

    def predict(self, items: Sequence[tuple[str, Sequence[str]]]) -> list[RankedPrediction]:
        return [self.rank(term, occurrences) for term, occurrences in items]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class SoftmaxTextClassifier(BaseEstimator):
    """Multinomial logistic regression over backend embeddings.

    Full-batch gradient descent on cross-entropy with seeded initialization;
    deterministic for a fixed seed.
    """

    def __init__(
        self,
        backend=None,
        n_classes: int | None = None,
        learning_rate: float = 1.0,
        epochs: int = 300,
        seed: int = 0,
    ):
        self.backend = backend
        self.n_classes = n_classes
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed

    def fit(self, texts: Sequence[str], y: Sequence[int]) -> "SoftmaxTextClassifier":
        if self.backend is None:
            raise ValueError("SoftmaxTextClassifier needs an embedding backend")
        y = np.asarray(y, dtype=np.int64)
        if len(texts) != y.shape[0]:
            raise ValueError("texts and labels must align")
        if np.unique(y).size < 2:
            raise ValueError("training data contains a single class")
        n_classes = self.n_classes or int(y.max()) + 1
        if y.min() < 0 or y.max() >= n_classes:
            raise ValueError("label index out of range")

        F = np.asarray(self.backend.embed_batch(list(texts)), dtype=np.float64)
        n, d = F.shape
        rng = np.random.default_rng(self.seed)
        W = 0.01 * rng.standard_normal((n_classes, d))
        b = np.zeros(n_classes)
        Y = np.zeros((n, n_classes))
        Y[np.arange(n), y] = 1.0

        for _ in range(self.epochs):
            probs = _softmax(F @ W.T + b)
            delta = (probs - Y) / n
            W -= self.learning_rate * (delta.T @ F)
            b -= self.learning_rate * delta.sum(axis=0)

        self.weights_ = W
        self.bias_ = b
        self.n_classes_ = n_classes
        return self

    def predict_proba_features(self, features: np.ndarray) -> np.ndarray:
        if not hasattr(self, "weights_"):
            raise NotFittedError("SoftmaxTextClassifier must be fit first")
        return _softmax(np.asarray(features, dtype=np.float64) @ self.weights_.T + self.bias_)

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        return self.predict_proba_features(self.backend.embed_batch(list(texts)))

    def predict(self, texts: Sequence[str]) -> np.ndarray:
        return self.predict_proba(texts).argmax(axis=1)


def train_softmax_classifier(
    train: Dataset,
    backend,
    catalog: LabelCatalog,
    learning_rate: float = 1.0,
    epochs: int = 300,
    seed: int = 0,
) -> SoftmaxTextClassifier:
    """Fit the classification baseline on a labeled augmented dataset."""
    texts, y = [], []
    for rec in train.records:
        if rec.label is None:
            raise ValueError(f"record {rec.term!r} has no label")
        texts.append(rec.surface)
        y.append(rec.label.index)
    clf = SoftmaxTextClassifier(
        backend=backend,
        n_classes=len(catalog),
        learning_rate=learning_rate,
        epochs=epochs,
        seed=seed,
    )
    return clf.fit(texts, y)


def classify_term(
    term: str,
    occurrences: Sequence[str],
    classifier: SoftmaxTextClassifier,
    backend,
    catalog: LabelCatalog,
) -> RankedPrediction:
    """Rank labels by the occurrence-averaged class probabilities."""
    if not occurrences:
        raise ValueError("classify_term needs at least one occurrence")
    labels = _ordered_labels(catalog)
    F = np.asarray(backend.embed_batch(list(occurrences)), dtype=np.float64)
    rows = _nonzero_occurrence_rows(occurrences, F)
    probs = classifier.predict_proba_features(F[rows])
    per_label = [_mean_sorted([float(probs[r, lab.index]) for r in range(len(rows))]) for lab in labels]
    return _ranked(term, labels, per_label)


def _check_aligned(gold: Sequence[tuple[str, str | LabelId]], preds: Sequence[RankedPrediction]):
    if len(gold) != len(preds):
        raise ValueError(f"gold has {len(gold)} instances but predictions have {len(preds)}")
    for i, ((term, _), pred) in enumerate(zip(gold, preds)):
        if term != pred.term:
            raise ValueError(f"instance {i}: gold term {term!r} != predicted term {pred.term!r}")


def _gold_name(label: str | LabelId) -> str:
    return label.name if isinstance(label, LabelId) else label


def accuracy(gold: Sequence[tuple[str, str | LabelId]], preds: Sequence[RankedPrediction]) -> float:
    """Fraction of instances whose top-ranked label is the gold label."""
    _check_aligned(gold, preds)
    hits = sum(1 for (_, lab), pred in zip(gold, preds) if pred.ranked_labels[0] == _gold_name(lab))
    return hits / len(gold)


def mean_rank(gold: Sequence[tuple[str, str | LabelId]], preds: Sequence[RankedPrediction]) -> float:
    """Mean 1-based position of the gold label in each ranked list."""
    _check_aligned(gold, preds)
    total = 0
    for (_, lab), pred in zip(gold, preds):
        name = _gold_name(lab)
        try:
            total += pred.ranked_labels.index(name) + 1
        except ValueError:
            raise ValueError(f"gold label {name!r} missing from ranked list for {pred.term!r}") from None
    return total / len(gold)


def save_predictions(preds: Sequence[RankedPrediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            fh.write(
                json.dumps(
                    {"term": p.term, "ranked_labels": list(p.ranked_labels), "scores": list(p.scores)},
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_predictions(path: str | Path) -> list[RankedPrediction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                RankedPrediction(
                    term=obj["term"],
                    ranked_labels=tuple(obj["ranked_labels"]),
                    scores=tuple(float(s) for s in obj["scores"]),
                )
            )
    return out


def save_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"accuracy": report.accuracy, "mean_rank": report.mean_rank, "n": report.n},
            fh,
        )
        fh.write("\n")
