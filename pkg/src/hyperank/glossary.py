"""Definition sources: token-overlap lookup matching and exact glossary hits.

Three source kinds attach definitions to terms: a lookup HTTP API with an
offline JSON cache (the hermetic default), and two local glossaries matched
by cleaned-text equality. The assembled augmented dataset carries one
record per term per successful source, plus the original surface.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import requests

from .acronym import expand_term
from .corpus import AugmentedRecord, Dataset, LabeledTerm, LabelId, Source
from .textnorm import clean, token_set

__all__ = [
    "LookupCandidate",
    "GlossaryEntry",
    "OverlapRatios",
    "overlap_ratios",
    "accept_match",
    "LookupConfig",
    "LookupClient",
    "LookupRequestError",
    "LookupFailure",
    "match_lookup",
    "match_exact",
    "augment",
    "load_glossary",
    "load_lookup_cache",
    "save_lookup_cache",
]


@dataclass(frozen=True)
class LookupCandidate:
    label: str
    description: str
    score_rank: int


@dataclass(frozen=True)
class GlossaryEntry:
    term: str
    definition: str
    source: Source

    def __post_init__(self) -> None:
        if self.source not in (Source.FIBO, Source.INVESTOPEDIA):
            raise ValueError(f"glossary source must be FIBO or Investopedia, got {self.source}")


@dataclass(frozen=True)
class OverlapRatios:
    ratio1: float
    ratio2: float


def overlap_ratios(s1: set[str], s2: set[str]) -> OverlapRatios:
    """ratio1 = |s1 & s2| / |s1|; ratio2 = |s2| / |s1|. Empty s1 is an error."""
    if not s1:
        raise ValueError("cannot compute overlap ratios for an empty term token set")
    return OverlapRatios(ratio1=len(s1 & s2) / len(s1), ratio2=len(s2) / len(s1))


def accept_match(r: OverlapRatios, ratio1_min: float = 1.0, ratio2_max: float = 1.25) -> bool:
    """Default acceptance: every term token covered, label at most 25% bigger."""
    return r.ratio1 >= ratio1_min and r.ratio2 <= ratio2_max


class LookupRequestError(RuntimeError):
    """Retriable lookup failure; carries the query that failed."""

    def __init__(self, query: str, reason: str):
        super().__init__(f"lookup failed for query {query!r}: {reason}")
        self.query = query
        self.reason = reason


@dataclass
class LookupConfig:
    base_url: str | None = None
    cache_path: str | Path | None = None
    offline: bool = True
    max_results: int = 10
    timeout: float = 10.0
    retries: int = 1
    backoff_base: float = 0.5


def _first_str(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        for item in value:
            if isinstance(item, str) and item:
                return item
    return ""


class LookupClient:
    """Definition lookup against an HTTP endpoint or a local cache file.

    Online mode issues ``GET <base-url>?query=...&format=JSON&maxResults=k``
    and reads the ``docs`` array (``label`` may be an array or a string; the
    description is the first non-empty of ``comment``/``description``).
    Offline mode resolves queries from the cache; a miss is an empty list.
    """

    def __init__(self, config: LookupConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session
        self._cache: dict[str, list[dict]] = {}
        if config.cache_path is not None:
            self._cache = load_lookup_cache(config.cache_path)
        if not config.offline and not config.base_url:
            raise ValueError("online lookup requires a base_url")

    def lookup(self, query: str) -> list[LookupCandidate]:
        if not query:
            raise ValueError("lookup query must be non-empty")
        if self.config.offline:
            return self._parse_docs(self._cache.get(query, []))
        return self._lookup_online(query)

    def _lookup_online(self, query: str) -> list[LookupCandidate]:
        session = self._session or requests
        params = {
            "query": query,
            "format": "JSON",
            "maxResults": str(self.config.max_results),
        }
        last_reason = "no attempt made"
        for attempt in range(max(1, self.config.retries)):
            if attempt:
                time.sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                resp = session.get(self.config.base_url, params=params, timeout=self.config.timeout)
                resp.raise_for_status()
                payload = resp.json()
            except (requests.RequestException, ValueError) as exc:
                last_reason = str(exc)
                continue
            docs = payload.get("docs")
            if not isinstance(docs, list):
                last_reason = "payload has no 'docs' array"
                continue
            return self._parse_docs(docs)
        raise LookupRequestError(query, last_reason)

    @staticmethod
    def _parse_docs(docs: Sequence[dict]) -> list[LookupCandidate]:
        out = []
        for rank, doc in enumerate(docs):
            if not isinstance(doc, dict):
                continue
            label = _first_str(doc.get("label"))
            if not label:
                continue
            description = _first_str(doc.get("comment")) or _first_str(doc.get("description"))
            out.append(LookupCandidate(label=label, description=description, score_rank=rank))
        return out


def match_lookup(
    term: str,
    candidates: Sequence[LookupCandidate],
    ratio1_min: float = 1.0,
    ratio2_max: float = 1.25,
) -> str | None:
    """Best-candidate description by token overlap of cleaned term vs label.

    Survivors of the acceptance rule are ordered by max ratio1, then min
    ratio2, then min score_rank; returns the winner's description.
    """
    s1 = token_set(clean(term))
    if not s1:
        return None
    best_key = None
    best: LookupCandidate | None = None
    for c in candidates:
        s2 = token_set(clean(c.label))
        r = overlap_ratios(s1, s2)
        if not accept_match(r, ratio1_min=ratio1_min, ratio2_max=ratio2_max):
            continue
        key = (-r.ratio1, r.ratio2, c.score_rank)
        if best_key is None or key < best_key:
            best_key, best = key, c
    return best.description if best is not None else None


def match_exact(term: str, glossary: Sequence[GlossaryEntry]) -> GlossaryEntry | None:
    """First glossary entry whose cleaned term equals the cleaned input."""
    cleaned = clean(term)
    for entry in glossary:
        if clean(entry.term) == cleaned:
            return entry
    return None


@dataclass(frozen=True)
class LookupFailure:
    term: str
    message: str


def augment(
    terms: Sequence[LabeledTerm] | Sequence[str],
    acronyms: dict[str, str] | None = None,
    glossaries: Sequence[GlossaryEntry] = (),
    lookup: LookupClient | None = None,
    ratio1_min: float = 1.0,
    ratio2_max: float = 1.25,
    max_in_flight: int = 4,
) -> tuple[Dataset, list[LookupFailure]]:
    """Assemble the augmented dataset for labeled or unlabeled terms.

    Every term contributes its original surface, plus one record per source
    that fires (acronym expansion, lookup description, FIBO or Investopedia
    definition). Lookup errors are collected per term and never abort the
    batch. Result order is stable in the input term order.
    """
    rows: list[tuple[str, LabelId | None]] = []
    for t in terms:
        if isinstance(t, LabeledTerm):
            rows.append((t.term, t.label))
        else:
            rows.append((t, None))

    fibo = [g for g in glossaries if g.source is Source.FIBO]
    investopedia = [g for g in glossaries if g.source is Source.INVESTOPEDIA]

    lookup_results: dict[int, list[LookupCandidate] | LookupFailure] = {}
    if lookup is not None:

        def _one(idx_term: tuple[int, str]):
            idx, term = idx_term
            try:
                return idx, lookup.lookup(term)
            except LookupRequestError as exc:
                return idx, LookupFailure(term=term, message=str(exc))

        jobs = [(i, term) for i, (term, _) in enumerate(rows)]
        with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
            for idx, result in pool.map(_one, jobs):
                lookup_results[idx] = result

    records: list[AugmentedRecord] = []
    failures: list[LookupFailure] = []
    for i, (term, label) in enumerate(rows):
        records.append(AugmentedRecord(term=term, surface=term, label=label, source=Source.ORIGINAL))

        if acronyms:
            expansion = expand_term(term, acronyms)
            if expansion is not None:
                records.append(
                    AugmentedRecord(term=term, surface=expansion, label=label, source=Source.ACRONYM)
                )

        result = lookup_results.get(i)
        if isinstance(result, LookupFailure):
            failures.append(result)
        elif result:
            description = match_lookup(term, result, ratio1_min=ratio1_min, ratio2_max=ratio2_max)
            if description:
                records.append(
                    AugmentedRecord(term=term, surface=description, label=label, source=Source.DBPEDIA)
                )

        fibo_hit = match_exact(term, fibo)
        if fibo_hit is not None:
            records.append(
                AugmentedRecord(term=term, surface=fibo_hit.definition, label=label, source=Source.FIBO)
            )

        inv_hit = match_exact(term, investopedia)
        if inv_hit is not None:
            records.append(
                AugmentedRecord(
                    term=term, surface=inv_hit.definition, label=label, source=Source.INVESTOPEDIA
                )
            )

    return Dataset(records), failures


def load_glossary(path: str | Path) -> list[GlossaryEntry]:
    """Load JSON-lines {"term", "definition", "source"} glossary entries."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            term = obj.get("term", "")
            definition = obj.get("definition", "")
            if not term or not definition:
                raise ValueError(f"{path}:{lineno}: glossary entries need term and definition")
            out.append(GlossaryEntry(term=term, definition=definition, source=Source(obj["source"])))
    return out


def load_lookup_cache(path: str | Path) -> dict[str, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"lookup cache {path} must be a JSON object")
    return {str(k): list(v) for k, v in data.items()}


def save_lookup_cache(cache: dict[str, list[dict]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cache, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
