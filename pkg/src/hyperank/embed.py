"""Embedding backends: a deterministic hashing TF-IDF baseline, a remote
service client, and shared vector math.

Any object with ``dim()`` and ``embed_batch(texts) -> (n, dim) array`` is a
backend. The baseline is a signed feature-hashing TF-IDF vectorizer over
cleaned tokens; transformer-quality vectors come from the remote service.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np
import requests
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .textnorm import clean, token_set

__all__ = [
    "EmbeddingBackend",
    "fit_idf",
    "baseline_embed",
    "HashingTfidfEmbedder",
    "RemoteEmbeddingClient",
    "EmbeddingProtocolError",
    "EmbeddingTransportError",
    "cosine",
    "save_idf",
    "load_idf",
]


@runtime_checkable
class EmbeddingBackend(Protocol):
    def dim(self) -> int: ...

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def fit_idf(corpus: Iterable[str]) -> dict[str, float]:
    """Smoothed idf over cleaned, tokenized documents.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1; tokens unseen at embed time
    default to 1.0.
    """
    df: Counter[str] = Counter()
    n_docs = 0
    for doc in corpus:
        n_docs += 1
        df.update(token_set(clean(doc)))
    if n_docs == 0:
        raise ValueError("idf fitting needs a non-empty corpus")
    return {tok: math.log((1 + n_docs) / (1 + d)) + 1.0 for tok, d in df.items()}


def _token_hash(token: str, hash_seed: int) -> int:
    digest = hashlib.blake2b(f"{hash_seed}:{token}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _require_power_of_two(dim: int) -> None:
    if dim <= 0 or dim & (dim - 1):
        raise ValueError(f"embedding dim must be a power of two, got {dim}")


def baseline_embed(
    text: str,
    dim: int = 32768,
    hash_seed: int = 0,
    idf: dict[str, float] | None = None,
) -> np.ndarray:
    """Signed-bucket hashed TF-IDF vector, L2-normalized (zero stays zero)."""
    _require_power_of_two(dim)
    idf = idf or {}
    vec = np.zeros(dim, dtype=np.float64)
    for token, tf in Counter(clean(text).split()).items():
        h = _token_hash(token, hash_seed)
        sign = 1.0 if (h >> 63) & 1 else -1.0
        vec[h % dim] += sign * tf * idf.get(token, 1.0)
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec


class HashingTfidfEmbedder(BaseEstimator):
    """Deterministic in-tree baseline embedder (fit idf, then transform).

    Parameters
    ----------
    n_features : embedding dimensionality, a power of two.
    hash_seed : seed mixed into the token hash.
    """

    def __init__(self, n_features: int = 32768, hash_seed: int = 0):
        self.n_features = n_features
        self.hash_seed = hash_seed

    def fit(self, corpus: Iterable[str], y=None) -> "HashingTfidfEmbedder":
        _require_power_of_two(self.n_features)
        self.idf_weights_ = fit_idf(corpus)
        return self

    def transform(self, texts: Sequence[str]) -> np.ndarray:
        if not hasattr(self, "idf_weights_"):
            raise NotFittedError("HashingTfidfEmbedder must be fit before transform")
        out = np.zeros((len(texts), self.n_features), dtype=np.float64)
        for i, text in enumerate(texts):
            out[i] = baseline_embed(
                text, dim=self.n_features, hash_seed=self.hash_seed, idf=self.idf_weights_
            )
        return out

    def fit_transform(self, corpus: Sequence[str], y=None) -> np.ndarray:
        return self.fit(corpus).transform(corpus)

    # Backend contract
    def dim(self) -> int:
        return self.n_features

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        return self.transform(texts)


class EmbeddingProtocolError(RuntimeError):
    """The service answered, but the payload violates the contract."""


class EmbeddingTransportError(RuntimeError):
    """The service could not be reached; carries the failed batch range."""

    def __init__(self, batch_range: tuple[int, int], reason: str):
        super().__init__(f"embedding request failed for texts [{batch_range[0]}:{batch_range[1]}]: {reason}")
        self.batch_range = batch_range


class RemoteEmbeddingClient:
    """Client for an external embedding service.

    POSTs ``{"texts": [...]}`` to ``<base-url>/embed`` and expects
    ``{"vectors": [[...], ...], "dim": D}``; validates vector count and a
    uniform dimension, retrying transport failures with exponential backoff.
    """

    def __init__(
        self,
        base_url: str,
        expected_dim: int | None = None,
        batch_size: int = 64,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        max_in_flight: int = 1,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.max_in_flight = max_in_flight
        self._session = session
        self._dim = expected_dim

    def dim(self) -> int:
        if self._dim is None:
            raise RuntimeError("embedding dim unknown: set expected_dim or embed a batch first")
        return self._dim

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self._dim or 0), dtype=np.float64)
        ranges = [
            (start, min(start + self.batch_size, len(texts)))
            for start in range(0, len(texts), self.batch_size)
        ]
        # Responses are matched to requests by batch index, never arrival order.
        with ThreadPoolExecutor(max_workers=max(1, self.max_in_flight)) as pool:
            parts = list(pool.map(lambda r: self._post_batch(texts, r), ranges))
        return np.vstack(parts)

    def _post_batch(self, texts: Sequence[str], batch_range: tuple[int, int]) -> np.ndarray:
        start, end = batch_range
        body = {"texts": list(texts[start:end])}
        session = self._session or requests
        last_reason = "no attempt made"
        for attempt in range(max(1, self.max_retries)):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                resp = session.post(f"{self.base_url}/embed", json=body, timeout=self.timeout)
                resp.raise_for_status()
                payload = resp.json()
            except (requests.RequestException, ValueError) as exc:
                last_reason = str(exc)
                continue
            return self._validate(payload, batch_range)
        raise EmbeddingTransportError(batch_range, last_reason)

    def _validate(self, payload: dict, batch_range: tuple[int, int]) -> np.ndarray:
        start, end = batch_range
        vectors = payload.get("vectors")
        if not isinstance(vectors, list):
            raise EmbeddingProtocolError("response has no 'vectors' array")
        if len(vectors) != end - start:
            raise EmbeddingProtocolError(
                f"expected {end - start} vectors for texts [{start}:{end}], got {len(vectors)}"
            )
        try:
            arr = np.asarray(vectors, dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingProtocolError(f"vectors are not a uniform matrix: {exc}") from exc
        if arr.ndim != 2:
            raise EmbeddingProtocolError("vectors must share a uniform dimension")
        reported = payload.get("dim")
        if reported is not None and int(reported) != arr.shape[1]:
            raise EmbeddingProtocolError(
                f"payload dim {reported} disagrees with vector width {arr.shape[1]}"
            )
        if self._dim is None:
            self._dim = arr.shape[1]
        elif arr.shape[1] != self._dim:
            raise EmbeddingProtocolError(f"dim changed from {self._dim} to {arr.shape[1]}")
        if not np.all(np.isfinite(arr)):
            raise EmbeddingProtocolError("vectors contain non-finite values")
        return arr


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; zero vectors are an error, never a silent 0."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    # Clamp rounding spill so identical vectors score exactly 1.0.
    return float(min(1.0, max(-1.0, np.dot(u, v) / (nu * nv))))


def save_idf(idf: dict[str, float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(idf, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def load_idf(path: str | Path) -> dict[str, float]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {str(k): float(v) for k, v in data.items()}
