"""Text cleaning shared by every term/label comparison in the pipeline.

The canonical normal form is: lowercase, punctuation and symbols replaced
by spaces, whitespace collapsed to single spaces, and each token
singularized by a small rule engine with an explicit exception map.
Digits are kept (tickers and index names contain them); letters outside
the Latin range are lowercased and kept as-is.
"""

from __future__ import annotations

import json
import unicodedata
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping

__all__ = [
    "clean",
    "singularize",
    "token_set",
    "load_exceptions",
    "default_exceptions",
]


@lru_cache(maxsize=None)
def _is_separator(ch: str) -> bool:
    # Punctuation (P*) and symbols (S*) per the cleaning contract; marks and
    # control characters are folded in so the output stays letters/digits/spaces.
    return unicodedata.category(ch)[0] in ("P", "S", "M", "C", "Z")


def load_exceptions(path: str | Path) -> dict[str, str]:
    """Load a plural -> singular override map from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"exception file {path} must hold a JSON object")
    return {str(k): str(v) for k, v in data.items()}


@lru_cache(maxsize=1)
def default_exceptions() -> dict[str, str]:
    """Bundled irregular-plural overrides (series, species, basis, ...)."""
    text = resources.files("hyperank.data").joinpath("singular_exceptions.json").read_text("utf-8")
    return {str(k): str(v) for k, v in json.loads(text).items()}


def singularize(token: str, exceptions: Mapping[str, str] | None = None) -> str:
    """Rule-based English singular of a lowercase, punctuation-free token.

    Rules, in order: exception map; "...ies" -> "...y"; "...sses"/"...xes"/
    "...ches"/"...shes" drop "es"; otherwise a trailing "s" is dropped unless
    the token ends in "ss" or "us" or has length <= 3.
    """
    if exceptions is None:
        exceptions = default_exceptions()
    if token in exceptions:
        return exceptions[token]
    if token.endswith("ies"):
        return token[:-3] + "y"
    if token.endswith(("sses", "xes", "ches", "shes")):
        return token[:-2]
    if token.endswith("s") and not token.endswith(("ss", "us")) and len(token) > 3:
        return token[:-1]
    return token


def clean(raw: str, exceptions: Mapping[str, str] | None = None) -> str:
    """Normalize text: lowercase, punctuation to space, collapse, singularize.

    Deterministic; an all-punctuation input yields the empty string.
    """
    lowered = raw.lower()
    spaced = "".join(" " if _is_separator(ch) or ch.isspace() else ch for ch in lowered)
    tokens = spaced.split()
    return " ".join(singularize(tok, exceptions) for tok in tokens)


def token_set(clean_text: str) -> set[str]:
    """Whitespace-split a cleaned string into a de-duplicated token set."""
    return set(clean_text.split())
