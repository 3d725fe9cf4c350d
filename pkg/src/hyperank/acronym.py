"""Acronym extraction from a plain-text corpus, filtering, and term expansion.

Extraction finds ``long form (SHORT)`` patterns by aligning the short form's
characters, right to left, against the words preceding the parenthesis
(the standard published abbreviation-alignment procedure). Extracted pairs
then pass four exclusion rules before entering the expansion table.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .textnorm import clean

__all__ = [
    "AcronymEntry",
    "extract_candidates",
    "extract_corpus",
    "filter_entries",
    "filter_entries_with_stats",
    "FILTER_RULES",
    "build_table",
    "expand_term",
    "load_wordlist",
    "default_wordlist",
    "load_table",
    "save_table",
    "load_corpus_dir",
]

_PAREN_RE = re.compile(r"\(([^()\n]{1,80})\)")
_WORD_RE = re.compile(r"\S+")

# Exclusion rules, applied in order; a dropped entry is attributed to the
# first rule it violates.
FILTER_RULES = (
    "expansion_not_longer",
    "expansion_has_parenthesis",
    "short_is_english_word",
    "expansion_too_short",
)


@dataclass(frozen=True)
class AcronymEntry:
    short: str
    long: str
    doc_id: str


def _plausible_short_form(text: str) -> bool:
    # 2..10 characters, at most two words, at least one letter, starts
    # alphanumeric: weeds out parentheticals that cannot be short forms.
    if not 2 <= len(text) <= 10:
        return False
    if len(text.split()) > 2:
        return False
    if not any(ch.isalpha() for ch in text):
        return False
    return text[0].isalnum()


def _preceding_window(before: str, max_words: int) -> str:
    spans = [m.span() for m in _WORD_RE.finditer(before)]
    if not spans:
        return ""
    start = spans[-max_words][0] if len(spans) > max_words else spans[0][0]
    return before[start : spans[-1][1]]


def _best_long_form(short: str, window: str) -> str | None:
    """Right-to-left character alignment of the short form in the window.

    Every alphanumeric character of the short form must appear, in order,
    in the window, and the short form's first character must sit at the
    start of a word. Returns the matched suffix of the window, or None.
    """
    s_idx = len(short) - 1
    l_idx = len(window) - 1
    while s_idx >= 0:
        ch = short[s_idx].lower()
        if not ch.isalnum():
            s_idx -= 1
            continue
        while l_idx >= 0 and (
            window[l_idx].lower() != ch
            or (s_idx == 0 and l_idx > 0 and window[l_idx - 1].isalnum())
        ):
            l_idx -= 1
        if l_idx < 0:
            return None
        l_idx -= 1
        s_idx -= 1
    start = window.rfind(" ", 0, l_idx + 1) + 1
    return window[start:].strip() or None


def extract_candidates(doc: str, doc_id: str) -> list[AcronymEntry]:
    """All (short, long) pairs found in one document, in text order."""
    out = []
    for match in _PAREN_RE.finditer(doc):
        short = match.group(1).strip()
        if not _plausible_short_form(short):
            continue
        window_words = min(len(short) + 5, len(short) * 2)
        window = _preceding_window(doc[: match.start()], window_words)
        if not window:
            continue
        long_form = _best_long_form(short, window)
        if long_form is not None and long_form:
            out.append(AcronymEntry(short=short, long=long_form, doc_id=doc_id))
    return out


def load_corpus_dir(path: str | Path) -> list[tuple[str, str]]:
    """Read every file in a directory as (doc_id, text), sorted by name."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    docs = []
    for p in sorted(root.iterdir()):
        if p.is_file():
            docs.append((p.name, p.read_text(encoding="utf-8", errors="replace")))
    return docs


def extract_corpus(docs: Iterable[tuple[str, str]]) -> list[AcronymEntry]:
    out: list[AcronymEntry] = []
    for doc_id, text in docs:
        out.extend(extract_candidates(text, doc_id))
    return out


def _first_violation(entry: AcronymEntry, wordlist: set[str]) -> str | None:
    if len(entry.long) <= len(entry.short):
        return "expansion_not_longer"
    if "(" in entry.long or ")" in entry.long:
        return "expansion_has_parenthesis"
    if entry.short.lower() in wordlist:
        return "short_is_english_word"
    if len(entry.long) <= 5:
        return "expansion_too_short"
    return None


def filter_entries(entries: Sequence[AcronymEntry], wordlist: set[str]) -> list[AcronymEntry]:
    """Keep entries passing all four exclusion rules; input order preserved."""
    return [e for e in entries if _first_violation(e, wordlist) is None]


def filter_entries_with_stats(
    entries: Sequence[AcronymEntry], wordlist: set[str]
) -> tuple[list[AcronymEntry], dict[str, int]]:
    """Like :func:`filter_entries`, plus per-rule drop counts."""
    kept = []
    dropped = {rule: 0 for rule in FILTER_RULES}
    for e in entries:
        rule = _first_violation(e, wordlist)
        if rule is None:
            kept.append(e)
        else:
            dropped[rule] += 1
    return kept, dropped


def build_table(entries: Iterable[AcronymEntry]) -> dict[str, str]:
    """Fold entries into a clean(short) -> long form map; first seen wins."""
    table: dict[str, str] = {}
    for e in entries:
        key = clean(e.short)
        if key and key not in table:
            table[key] = e.long
    return table


def expand_term(term: str, table: Mapping[str, str]) -> str | None:
    """Expand a term via the table, or None when nothing applies.

    A whole-term key hit returns the long form; otherwise the first cleaned
    token (left to right) that is a key gets replaced in place. Never
    returns the input unchanged.
    """
    cleaned = clean(term)
    if not cleaned:
        return None
    if cleaned in table:
        expansion = table[cleaned]
        return expansion if expansion != term else None
    tokens = cleaned.split()
    for i, tok in enumerate(tokens):
        if tok in table:
            expanded = " ".join(tokens[:i] + [table[tok]] + tokens[i + 1 :])
            return expanded if expanded != term else None
    return None


def load_wordlist(path: str | Path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip().lower() for line in fh if line.strip()}


def default_wordlist() -> set[str]:
    """Bundled lowercase English lexicon for the valid-word exclusion rule."""
    text = resources.files("hyperank.data").joinpath("english_words.txt").read_text("utf-8")
    return {line.strip() for line in text.splitlines() if line.strip()}


def save_table(table: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dict(sorted(table.items())), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_table(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"acronym table {path} must be a JSON object")
    return {str(k): str(v) for k, v in data.items()}
