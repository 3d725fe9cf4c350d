"""Canonical data model: labels, terms, augmented records, datasets.

The default label set is the 17 canonical hypernym labels in their stable
catalog order; fixtures and toy pipelines may substitute a smaller
:class:`LabelSet`. All loaders read UTF-8 JSON-lines, one object per row.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "CANONICAL_LABEL_NAMES",
    "LabelId",
    "LabelSet",
    "LabeledTerm",
    "CatalogEntry",
    "LabelCatalog",
    "Source",
    "AugmentedRecord",
    "Dataset",
    "load_labeled_terms",
    "save_labeled_terms",
    "load_records",
    "save_records",
    "load_catalog",
    "save_catalog",
    "validate_catalog",
    "split",
]

# Stable catalog order; index into this tuple is the canonical label index.
CANONICAL_LABEL_NAMES: tuple[str, ...] = (
    "Equity Index",
    "Regulatory Agency",
    "Credit Index",
    "Central Securities Depository",
    "Debt pricing and yields",
    "Bonds",
    "Swap",
    "Stock Corporation",
    "Option",
    "Funds",
    "Future",
    "Credit Events",
    "MMIs",
    "Stocks",
    "Parametric schedules",
    "Forward",
    "Securities restrictions",
)


@dataclass(frozen=True, order=True)
class LabelId:
    """A label name with its stable position in the catalog order."""

    index: int
    name: str


class LabelSet:
    """Ordered set of distinct labels; order defines the canonical index."""

    def __init__(self, names: Sequence[str]):
        if len(set(names)) != len(names):
            raise ValueError("label names must be distinct")
        if not names:
            raise ValueError("label set must not be empty")
        self._labels = tuple(LabelId(i, name) for i, name in enumerate(names))
        self._by_name = {lab.name: lab for lab in self._labels}

    @classmethod
    def canonical(cls) -> "LabelSet":
        return cls(CANONICAL_LABEL_NAMES)

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[LabelId]:
        return iter(self._labels)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def by_name(self, name: str) -> LabelId:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown label name: {name!r}") from None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(lab.name for lab in self._labels)


@dataclass(frozen=True)
class LabeledTerm:
    term: str
    label: LabelId


@dataclass(frozen=True)
class CatalogEntry:
    label: LabelId
    definition: str


class LabelCatalog:
    """One natural-language definition per label."""

    def __init__(self, entries: Sequence[CatalogEntry]):
        self.entries = tuple(entries)
        self._by_name = {e.label.name: e for e in self.entries}

    def definition_of(self, label: LabelId | str) -> str:
        name = label.name if isinstance(label, LabelId) else label
        return self._by_name[name].definition

    def labels(self) -> tuple[LabelId, ...]:
        return tuple(e.label for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


class Source(str, Enum):
    """Provenance of one surface realization of a term."""

    ORIGINAL = "Original"
    ACRONYM = "AcronymExpansion"
    DBPEDIA = "DBpedia"
    FIBO = "FIBO"
    INVESTOPEDIA = "Investopedia"


@dataclass(frozen=True)
class AugmentedRecord:
    """One surface (original text, expansion, or definition) of a term."""

    term: str
    surface: str
    label: LabelId | None
    source: Source


@dataclass
class Dataset:
    records: list[AugmentedRecord]
    counts_by_source: dict[Source, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.counts_by_source:
            self.counts_by_source = dict(Counter(r.source for r in self.records))


def _read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}:{lineno}: row is not a JSON object")
            yield lineno, obj


def load_labeled_terms(
    path: str | Path,
    label_set: LabelSet | None = None,
) -> list[LabeledTerm]:
    """Load term/label rows, dropping exact duplicates.

    A row whose term repeats under a *different* label is kept (conflicting
    gold rows are separate instances); a row repeating the same (term, label)
    is dropped. Unknown label names and empty terms are fatal.
    """
    labels = label_set or LabelSet.canonical()
    seen: set[tuple[str, str]] = set()
    out: list[LabeledTerm] = []
    for lineno, obj in _read_jsonl(path):
        term = obj.get("term")
        if not isinstance(term, str) or not term.strip():
            raise ValueError(f"{path}:{lineno}: empty or missing term")
        name = obj.get("label")
        if name is None:
            raise ValueError(f"{path}:{lineno}: missing label for term {term!r}")
        if name not in labels:
            raise ValueError(f"{path}:{lineno}: unknown label name {name!r}")
        key = (term, name)
        if key in seen:
            continue
        seen.add(key)
        out.append(LabeledTerm(term=term, label=labels.by_name(name)))
    return out


def save_labeled_terms(terms: Iterable[LabeledTerm], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in terms:
            fh.write(json.dumps({"term": t.term, "label": t.label.name}, ensure_ascii=False) + "\n")


def load_test_terms(path: str | Path) -> list[str]:
    """Load unlabeled term rows (label field, if present, is ignored)."""
    out = []
    for lineno, obj in _read_jsonl(path):
        term = obj.get("term")
        if not isinstance(term, str) or not term.strip():
            raise ValueError(f"{path}:{lineno}: empty or missing term")
        out.append(term)
    return out


def load_records(path: str | Path, label_set: LabelSet | None = None) -> Dataset:
    """Load augmented records as written by :func:`save_records`."""
    labels = label_set or LabelSet.canonical()
    records = []
    for lineno, obj in _read_jsonl(path):
        name = obj.get("label")
        if name is not None and name not in labels:
            raise ValueError(f"{path}:{lineno}: unknown label name {name!r}")
        try:
            source = Source(obj["source"])
        except (KeyError, ValueError):
            raise ValueError(f"{path}:{lineno}: bad or missing source") from None
        term = obj.get("term")
        surface = obj.get("surface")
        if not term or not surface:
            raise ValueError(f"{path}:{lineno}: record needs non-empty term and surface")
        if source is Source.ORIGINAL and surface != term:
            raise ValueError(f"{path}:{lineno}: Original record surface must equal its term")
        records.append(
            AugmentedRecord(
                term=term,
                surface=surface,
                label=labels.by_name(name) if name is not None else None,
                source=source,
            )
        )
    return Dataset(records)


def save_records(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in dataset.records:
            obj: dict = {"term": r.term, "surface": r.surface, "source": r.source.value}
            if r.label is not None:
                obj["label"] = r.label.name
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_catalog(path: str | Path, label_set: LabelSet | None = None) -> LabelCatalog:
    """Load a JSON array of {"label", "definition"} entries."""
    labels = label_set or LabelSet.canonical()
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError(f"{path}: catalog must be a JSON array")
    entries = []
    for i, obj in enumerate(data):
        name = obj.get("label")
        if name not in labels:
            raise ValueError(f"{path}: entry {i}: unknown label name {name!r}")
        entries.append(CatalogEntry(labels.by_name(name), str(obj.get("definition", ""))))
    return LabelCatalog(entries)


def save_catalog(catalog: LabelCatalog, path: str | Path) -> None:
    data = [{"label": e.label.name, "definition": e.definition} for e in catalog.entries]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def validate_catalog(catalog: LabelCatalog, label_set: LabelSet | None = None) -> list[str]:
    """Report missing/duplicated labels and empty definitions; [] means ok."""
    labels = label_set or LabelSet.canonical()
    problems = []
    counts = Counter(e.label.name for e in catalog.entries)
    for lab in labels:
        if counts[lab.name] == 0:
            problems.append(f"missing label: {lab.name!r}")
        elif counts[lab.name] > 1:
            problems.append(f"duplicate label: {lab.name!r} ({counts[lab.name]} entries)")
    for name in counts:
        if name not in labels:
            problems.append(f"unexpected label: {name!r}")
    for e in catalog.entries:
        if not e.definition.strip():
            problems.append(f"empty definition: {e.label.name!r}")
    return problems


def split(
    records: Sequence[LabeledTerm],
    train_fraction: float,
    seed: int = 42,
) -> tuple[list[LabeledTerm], list[LabeledTerm]]:
    """Deterministic seeded shuffle-split into (train, validation).

    Sizes are round(n * f) and n - round(n * f) (Python round, banker's at
    exact .5). The two parts are disjoint and exhaustive.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(records)
    if n < 2:
        raise ValueError("need at least 2 records to split")
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * train_fraction))
    train = [records[i] for i in order[:n_train]]
    validation = [records[i] for i in order[n_train:]]
    return train, validation
