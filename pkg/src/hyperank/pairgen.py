"""Graded similarity training pairs with negative sampling and zero trimming.

Each augmented record contributes one score-1.0 pair against its own label
definition plus a fixed number of sampled negatives scored from the label
taxonomy (0, k, or 2k). Score-0 pairs are then randomly under-sampled to a
target fraction of the output; non-zero pairs are never dropped.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Dataset, LabelCatalog
from .taxonomy import Taxonomy, pair_score

__all__ = [
    "ScoredPair",
    "PairGenConfig",
    "generate",
    "undersample_zeros",
    "distribution_report",
    "save_pairs",
    "load_pairs",
]


@dataclass(frozen=True)
class ScoredPair:
    anchor: str
    other: str
    score: float
    anchor_label: str
    other_label: str


@dataclass(frozen=True)
class PairGenConfig:
    k: float = 0.4
    negatives_per_positive: int = 10
    target_zero_fraction: float = 0.30
    seed: int = 42

    def __post_init__(self) -> None:
        if not 0.0 < self.k < 0.5:
            raise ValueError(f"k must be in (0, 0.5), got {self.k}")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if not 0.0 < self.target_zero_fraction < 1.0:
            raise ValueError("target_zero_fraction must be in (0, 1)")


def generate(
    train: Dataset,
    catalog: LabelCatalog,
    taxonomy: Taxonomy,
    cfg: PairGenConfig,
) -> list[ScoredPair]:
    """Emit (1 + negatives_per_positive) scored pairs per labeled record.

    Negatives are records sampled uniformly without replacement among those
    with a different label; each sampled record's label definition becomes
    the pair's other side, scored by the taxonomy. Sampling is split per
    anchor index from the master seed, so order is reproducible.
    """
    records = train.records
    for i, rec in enumerate(records):
        if rec.label is None:
            raise ValueError(f"record {i} ({rec.term!r}) has no label; pairs need labeled data")

    label_names = [rec.label.name for rec in records]  # type: ignore[union-attr]
    pairs: list[ScoredPair] = []
    for i, rec in enumerate(records):
        anchor_label = label_names[i]
        pairs.append(
            ScoredPair(
                anchor=rec.surface,
                other=catalog.definition_of(anchor_label),
                score=1.0,
                anchor_label=anchor_label,
                other_label=anchor_label,
            )
        )
        pool = [j for j in range(len(records)) if label_names[j] != anchor_label]
        if not pool:
            warnings.warn(
                f"no records with a label other than {anchor_label!r}; "
                f"anchor {rec.surface!r} gets no negatives"
            )
            continue
        rng = np.random.default_rng([cfg.seed, i])
        n = cfg.negatives_per_positive
        if len(pool) >= n:
            chosen = rng.choice(len(pool), size=n, replace=False)
        else:
            warnings.warn(
                f"only {len(pool)} candidate negatives for anchor {rec.surface!r}; "
                f"sampling {n} with replacement"
            )
            chosen = rng.choice(len(pool), size=n, replace=True)
        for j in chosen:
            other_label = label_names[pool[j]]
            pairs.append(
                ScoredPair(
                    anchor=rec.surface,
                    other=catalog.definition_of(other_label),
                    score=pair_score(taxonomy, anchor_label, other_label, cfg.k),
                    anchor_label=anchor_label,
                    other_label=other_label,
                )
            )
    return pairs


def undersample_zeros(
    pairs: Sequence[ScoredPair],
    target_zero_fraction: float,
    seed: int = 42,
) -> list[ScoredPair]:
    """Trim score-0 pairs to ~the target output fraction; keep all others.

    Keeps round(f/(1-f) * n_nonzero) zeros (capped at availability; Python
    round) chosen uniformly, then shuffles the combined list with the seed.
    """
    if not 0.0 < target_zero_fraction < 1.0:
        raise ValueError("target_zero_fraction must be in (0, 1)")
    nonzero = [p for p in pairs if p.score != 0.0]
    zeros = [p for p in pairs if p.score == 0.0]
    if not nonzero:
        raise ValueError("undersample_zeros needs at least one non-zero pair")
    f = target_zero_fraction
    n_keep = min(len(zeros), int(round(f / (1.0 - f) * len(nonzero))))
    rng = np.random.default_rng(seed)
    kept_idx = rng.choice(len(zeros), size=n_keep, replace=False) if zeros else np.array([], dtype=int)
    kept = nonzero + [zeros[i] for i in sorted(kept_idx)]
    order = rng.permutation(len(kept))
    return [kept[i] for i in order]


def distribution_report(pairs: Sequence[ScoredPair]) -> dict[float, tuple[int, float]]:
    """Exact count and fraction per score bucket; empty input yields {}."""
    if not pairs:
        return {}
    counts: dict[float, int] = {}
    for p in pairs:
        counts[p.score] = counts.get(p.score, 0) + 1
    total = len(pairs)
    return {score: (n, n / total) for score, n in sorted(counts.items(), reverse=True)}


def save_pairs(pairs: Sequence[ScoredPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(
                json.dumps(
                    {
                        "anchor": p.anchor,
                        "other": p.other,
                        "score": p.score,
                        "anchor_label": p.anchor_label,
                        "other_label": p.other_label,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_pairs(path: str | Path) -> list[ScoredPair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                ScoredPair(
                    anchor=obj["anchor"],
                    other=obj["other"],
                    score=float(obj["score"]),
                    anchor_label=obj["anchor_label"],
                    other_label=obj["other_label"],
                )
            )
    return out
