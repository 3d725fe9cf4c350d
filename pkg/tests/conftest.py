"""Shared fixtures: label sets, toy taxonomies, stub backends, a local HTTP
server for the lookup/embedding clients, and a toy pipeline workspace."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from hyperank.corpus import CatalogEntry, LabelCatalog, LabelSet
from hyperank.taxonomy import TaxonomyNode, build_taxonomy


class StubBackend:
    """Backend returning canned vectors per text; for crafted-score tests."""

    def __init__(self, mapping: dict[str, np.ndarray]):
        self.mapping = {k: np.asarray(v, dtype=np.float64) for k, v in mapping.items()}
        self._dim = len(next(iter(self.mapping.values())))

    def dim(self) -> int:
        return self._dim

    def embed_batch(self, texts):
        return np.array([self.mapping[t] for t in texts], dtype=np.float64)


@pytest.fixture
def stub_backend_factory():
    return StubBackend


@pytest.fixture
def canonical_labels() -> LabelSet:
    return LabelSet.canonical()


@pytest.fixture
def toy_labels() -> LabelSet:
    return LabelSet(["Bonds", "Stocks", "Funds"])


@pytest.fixture
def toy_catalog(toy_labels) -> LabelCatalog:
    defs = {
        "Bonds": "coupon maturity issuer redemption principal indenture",
        "Stocks": "dividend shareholder listing votes ticker floatation",
        "Funds": "portfolio manager pooling investor mandate units",
    }
    return LabelCatalog([CatalogEntry(lab, defs[lab.name]) for lab in toy_labels])


@pytest.fixture
def toy_taxonomy(toy_labels):
    roots = [
        TaxonomyNode(
            "Instruments",
            (
                TaxonomyNode("DebtSide", (TaxonomyNode("Bonds"),)),
                TaxonomyNode("EquitySide", (TaxonomyNode("Stocks"),)),
            ),
        ),
        TaxonomyNode("Vehicles", (TaxonomyNode("Funds"),)),
    ]
    return build_taxonomy(roots, toy_labels)


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):  # keep test output clean
        pass

    def _send_json(self, obj, status=200):
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        state = self.server.state  # type: ignore[attr-defined]
        state["get_hits"] += 1
        if state["fail_next"] > 0:
            state["fail_next"] -= 1
            self._send_json({"error": "flaky"}, status=500)
            return
        if state.get("malformed"):
            self.send_response(200)
            self.send_header("Content-Length", "7")
            self.end_headers()
            self.wfile.write(b"not json")
            return
        from urllib.parse import parse_qs, urlparse

        query = parse_qs(urlparse(self.path).query).get("query", [""])[0]
        docs = state["lookup_docs"].get(query, [])
        self._send_json({"docs": docs})

    def do_POST(self):
        state = self.server.state  # type: ignore[attr-defined]
        state["post_hits"] += 1
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        texts = payload["texts"]
        if state["fail_next"] > 0:
            state["fail_next"] -= 1
            self._send_json({"error": "flaky"}, status=500)
            return
        mode = state["embed_mode"]
        dim = state["embed_dim"]
        rng = np.random.default_rng(0)
        vectors = [list(rng.normal(size=dim)) for _ in texts]
        if mode == "short":
            vectors = vectors[:-1]
        if mode == "ragged":
            self._send_json({"vectors": vectors[:-1] + [vectors[-1][:-1]], "dim": dim})
            return
        if mode == "wrong_dim_field":
            self._send_json({"vectors": vectors, "dim": dim + 1})
            return
        self._send_json({"vectors": vectors, "dim": dim})


@pytest.fixture
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    server.state = {  # type: ignore[attr-defined]
        "lookup_docs": {},
        "embed_mode": "ok",
        "embed_dim": 8,
        "fail_next": 0,
        "get_hits": 0,
        "post_hits": 0,
    }
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_port}"
    try:
        yield url, server.state  # type: ignore[attr-defined]
    finally:
        server.shutdown()
        thread.join(timeout=5)


TOY_VOCAB = {
    "Bonds": ["coupon", "maturity", "issuer", "redemption", "principal", "indenture"],
    "Stocks": ["dividend", "shareholder", "listing", "votes", "ticker", "floatation"],
    "Funds": ["portfolio", "manager", "pooling", "investor", "mandate", "units"],
}


def build_toy_workspace(root: Path, out_dir: str = "out", seed: int = 42, n_per_label: int = 20) -> Path:
    """Write a 3-label, disjoint-vocabulary workspace (terms/catalog/taxonomy/config).

    Returns the config path. Labels' term texts draw only from their own
    vocabulary, so the similarity ranking is perfectly separable.
    """
    labels = list(TOY_VOCAB)
    catalog = [{"label": lab, "definition": " ".join(TOY_VOCAB[lab])} for lab in labels]
    (root / "catalog.json").write_text(json.dumps(catalog))
    tree = [
        {
            "name": "Instruments",
            "children": [
                {"name": "DebtSide", "children": [{"name": "Bonds", "children": []}]},
                {"name": "EquitySide", "children": [{"name": "Stocks", "children": []}]},
            ],
        },
        {"name": "Vehicles", "children": [{"name": "Funds", "children": []}]},
    ]
    (root / "taxonomy.json").write_text(json.dumps(tree))

    rng = np.random.default_rng(5)
    with open(root / "terms.jsonl", "w") as fh:
        for lab in labels:
            toks = TOY_VOCAB[lab]
            for i in range(n_per_label):
                pick = rng.choice(len(toks), size=3, replace=False)
                term = " ".join(toks[j] for j in pick) + f" {lab.lower()}{i}"
                fh.write(json.dumps({"term": term, "label": lab}) + "\n")

    config = {
        "seed": seed,
        "paths": {
            "terms": "terms.jsonl",
            "catalog": "catalog.json",
            "taxonomy": "taxonomy.json",
            "out_dir": out_dir,
        },
        "embed": {"dim": 256},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    return config_path


@pytest.fixture
def toy_workspace(tmp_path):
    return build_toy_workspace(tmp_path)
