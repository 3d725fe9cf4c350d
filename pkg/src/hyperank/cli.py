"""Batch pipeline CLI: each stage reads/writes auditable files.

Subcommands: extract-acronyms, augment, gen-pairs, train-head,
train-baseline, rank, evaluate. A JSON config file supplies paths and
knobs; command-line flags override it. Outputs are written atomically
(temp file + rename), so a failed command never leaves partial artifacts.
Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import acronym as acr
from . import corpus, glossary, pairgen, ranking, simtrain, taxonomy
from .embed import HashingTfidfEmbedder, RemoteEmbeddingClient

__all__ = ["main", "ConfigError", "DEFAULTS"]


class ConfigError(Exception):
    """Bad configuration: missing path, knob out of range (exit code 2)."""


DEFAULTS: dict = {
    "seed": 42,
    "paths": {
        "terms": None,
        "test_terms": None,
        "corpus_dir": None,
        "glossaries": [],
        "taxonomy": None,  # null -> bundled default tree
        "catalog": None,  # null -> bundled default catalog
        "lookup_cache": None,
        "acronyms": None,
        "wordlist": None,  # null -> bundled lexicon
        "out_dir": "out",
    },
    "augment": {
        "train_fraction": 0.8,  # 80/20 split
        "ratio1_min": 1.0,
        "ratio2_max": 1.25,
        "lookup_url": None,
        "max_results": 10,
        "offline": True,
        "max_in_flight": 4,
        "timeout": 10.0,
        "retries": 1,
    },
    "pairs": {
        "k": 0.4,
        "negatives_per_positive": 10,
        "target_zero_fraction": 0.30,
    },
    "embed": {
        "backend": "baseline",
        "dim": 1024,
        "hash_seed": 0,
        "service_url": None,
        "service_dim": None,
        "batch_size": 64,
        "max_retries": 3,
    },
    "train": {
        "learning_rate": 2e-5,
        "epochs": 25,
        "batch_size": 20,
        "margin": 0.5,
        "mnrl_scale": 20.0,
        "binary_threshold": 0.5,
        "head_dim": None,
        "init_noise": 1e-3,
    },
    "classifier": {
        "learning_rate": 1.0,
        "epochs": 300,
    },
}

# Square-head weight budget; beyond this, training needs a smaller embed dim.
_HEAD_WEIGHT_BUDGET = 2**26


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return json.loads(json.dumps(DEFAULTS)), Path.cwd()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, encoding="utf-8") as fh:
            user = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return _deep_merge(json.loads(json.dumps(DEFAULTS)), user), p.parent.resolve()


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _atomic_write(path: Path, write_fn: Callable[[Path], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    os.close(fd)
    try:
        write_fn(Path(tmp))
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _require_file(path: Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} is not configured")
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _bundled(name: str) -> Path:
    return Path(str(resources.files("hyperank.data").joinpath(name)))


def _load_catalog_and_labels(cfg: dict, base: Path) -> tuple[corpus.LabelCatalog, corpus.LabelSet]:
    path = _resolve(base, cfg["paths"]["catalog"]) or _bundled("default_catalog.json")
    if not path.is_file():
        raise ConfigError(f"label catalog not found: {path}")
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"label catalog {path} must be a non-empty JSON array")
    try:
        labels = corpus.LabelSet([str(e["label"]) for e in raw])
        catalog = corpus.load_catalog(path, labels)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad label catalog {path}: {exc}") from exc
    problems = corpus.validate_catalog(catalog, labels)
    if problems:
        raise ConfigError(f"invalid label catalog {path}: " + "; ".join(problems))
    return catalog, labels


def _load_taxonomy(cfg: dict, base: Path, labels: corpus.LabelSet) -> taxonomy.Taxonomy:
    path = _resolve(base, cfg["paths"]["taxonomy"]) or _bundled("default_taxonomy.json")
    if not path.is_file():
        raise ConfigError(f"taxonomy file not found: {path}")
    try:
        return taxonomy.load_taxonomy(path, labels)
    except ValueError as exc:
        raise ConfigError(f"invalid taxonomy {path}: {exc}") from exc


def _out_dir(cfg: dict, base: Path, args) -> Path:
    value = getattr(args, "out_dir", None) or cfg["paths"]["out_dir"]
    return _resolve(base, value)  # type: ignore[return-value]


def _build_fresh_backend(cfg: dict, fit_corpus: Sequence[str]):
    embed_cfg = cfg["embed"]
    if embed_cfg["backend"] == "baseline":
        dim = int(embed_cfg["dim"])
        if dim <= 0 or dim & (dim - 1):
            raise ConfigError(f"embed.dim must be a power of two, got {dim}")
        embedder = HashingTfidfEmbedder(n_features=dim, hash_seed=int(embed_cfg["hash_seed"]))
        return embedder.fit(fit_corpus)
    if embed_cfg["backend"] == "remote":
        if not embed_cfg["service_url"]:
            raise ConfigError("embed.backend is 'remote' but embed.service_url is not set")
        return RemoteEmbeddingClient(
            base_url=embed_cfg["service_url"],
            expected_dim=embed_cfg["service_dim"],
            batch_size=int(embed_cfg["batch_size"]),
            max_retries=int(embed_cfg["max_retries"]),
        )
    raise ConfigError(f"unknown embed.backend: {embed_cfg['backend']!r}")


def _embedder_doc(backend) -> dict:
    if isinstance(backend, HashingTfidfEmbedder):
        return {
            "type": "baseline",
            "n_features": backend.n_features,
            "hash_seed": backend.hash_seed,
            "idf": backend.idf_weights_,
        }
    return {
        "type": "remote",
        "url": backend.base_url,
        "dim": backend._dim,
        "batch_size": backend.batch_size,
        "max_retries": backend.max_retries,
    }


def _backend_from_doc(doc: dict):
    if doc["type"] == "baseline":
        embedder = HashingTfidfEmbedder(n_features=int(doc["n_features"]), hash_seed=int(doc["hash_seed"]))
        embedder.idf_weights_ = {str(k): float(v) for k, v in doc["idf"].items()}
        return embedder
    return RemoteEmbeddingClient(
        base_url=doc["url"],
        expected_dim=doc.get("dim"),
        batch_size=int(doc.get("batch_size", 64)),
        max_retries=int(doc.get("max_retries", 3)),
    )


def _write_json(obj, path: Path) -> None:
    _atomic_write(path, lambda p: p.write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", "utf-8"))


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------


def cmd_extract_acronyms(args, cfg: dict, base: Path) -> int:
    corpus_dir = _resolve(base, args.corpus_dir or cfg["paths"]["corpus_dir"])
    if corpus_dir is None:
        raise ConfigError("corpus_dir is not configured")
    if not corpus_dir.is_dir():
        raise ConfigError(f"corpus directory not found: {corpus_dir}")
    wordlist_path = _resolve(base, cfg["paths"]["wordlist"])
    wordlist = acr.load_wordlist(wordlist_path) if wordlist_path else acr.default_wordlist()

    docs = acr.load_corpus_dir(corpus_dir)
    candidates = acr.extract_corpus(docs)
    kept, dropped = acr.filter_entries_with_stats(candidates, wordlist)
    table = acr.build_table(kept)

    out = _out_dir(cfg, base, args)
    table_path = _resolve(base, args.out) if args.out else out / "acronyms.json"
    _atomic_write(table_path, lambda p: acr.save_table(table, p))
    stats = {
        "documents": len(docs),
        "candidates": len(candidates),
        "dropped": dropped,
        "kept_entries": len(kept),
        "table_size": len(table),
    }
    _write_json(stats, out / "acronym_stats.json")

    print(f"documents: {len(docs)}")
    print(f"candidates: {len(candidates)}")
    for rule in acr.FILTER_RULES:
        print(f"dropped[{rule}]: {dropped[rule]}")
    print(f"kept: {len(kept)} (table size {len(table)})")
    print(f"wrote {table_path}")
    return 0


def _maybe_lookup_client(cfg: dict, base: Path, offline_flag: bool) -> glossary.LookupClient | None:
    aug = cfg["augment"]
    offline = bool(offline_flag or aug["offline"])
    cache_path = _resolve(base, cfg["paths"]["lookup_cache"])
    if offline:
        if cache_path is None:
            return None
        if not cache_path.is_file():
            raise ConfigError(f"lookup cache not found: {cache_path}")
        return glossary.LookupClient(glossary.LookupConfig(cache_path=cache_path, offline=True))
    if not aug["lookup_url"]:
        raise ConfigError("online lookup requested but augment.lookup_url is not set")
    return glossary.LookupClient(
        glossary.LookupConfig(
            base_url=aug["lookup_url"],
            offline=False,
            max_results=int(aug["max_results"]),
            timeout=float(aug["timeout"]),
            retries=int(aug["retries"]),
        )
    )


def cmd_augment(args, cfg: dict, base: Path) -> int:
    _, labels = _load_catalog_and_labels(cfg, base)
    terms_path = _require_file(_resolve(base, args.terms or cfg["paths"]["terms"]), "terms file")
    terms = corpus.load_labeled_terms(terms_path, labels)

    fraction = float(cfg["augment"]["train_fraction"])
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"augment.train_fraction must be in (0, 1), got {fraction}")
    seed = int(cfg["seed"])
    train_terms, val_terms = corpus.split(terms, fraction, seed)

    acronyms = None
    acr_path = _resolve(base, cfg["paths"]["acronyms"])
    if acr_path is not None:
        acronyms = acr.load_table(_require_file(acr_path, "acronym table"))

    entries: list[glossary.GlossaryEntry] = []
    for g in cfg["paths"]["glossaries"]:
        entries.extend(glossary.load_glossary(_require_file(_resolve(base, g), "glossary file")))

    lookup = _maybe_lookup_client(cfg, base, args.offline)
    aug = cfg["augment"]

    def _augment(rows):
        return glossary.augment(
            rows,
            acronyms=acronyms,
            glossaries=entries,
            lookup=lookup,
            ratio1_min=float(aug["ratio1_min"]),
            ratio2_max=float(aug["ratio2_max"]),
            max_in_flight=int(aug["max_in_flight"]),
        )

    out = _out_dir(cfg, base, args)
    counts: dict = {}
    all_failures: list[glossary.LookupFailure] = []

    for name, rows in (("train", train_terms), ("validation", val_terms)):
        dataset, failures = _augment(rows)
        all_failures.extend(failures)
        _atomic_write(out / f"{name}.aug.jsonl", lambda p, d=dataset: corpus.save_records(d, p))
        _atomic_write(out / f"{name}.terms.jsonl", lambda p, r=rows: corpus.save_labeled_terms(r, p))
        counts[name] = {src.value: n for src, n in sorted(dataset.counts_by_source.items())}
        counts[name]["total"] = len(dataset.records)

    test_path = _resolve(base, cfg["paths"]["test_terms"])
    if test_path is not None:
        test_terms = corpus.load_test_terms(_require_file(test_path, "test terms file"))
        dataset, failures = _augment(test_terms)
        all_failures.extend(failures)
        _atomic_write(out / "test.aug.jsonl", lambda p, d=dataset: corpus.save_records(d, p))
        counts["test"] = {src.value: n for src, n in sorted(dataset.counts_by_source.items())}
        counts["test"]["total"] = len(dataset.records)

    counts["lookup_failures"] = [{"term": f.term, "message": f.message} for f in all_failures]
    _write_json(counts, out / "augment_counts.json")

    for split_name, table in counts.items():
        if split_name == "lookup_failures":
            continue
        row = ", ".join(f"{k}={v}" for k, v in table.items())
        print(f"{split_name}: {row}")
    if all_failures:
        print(f"lookup failures: {len(all_failures)} (see augment_counts.json)", file=sys.stderr)
    return 0


def cmd_gen_pairs(args, cfg: dict, base: Path) -> int:
    catalog, labels = _load_catalog_and_labels(cfg, base)
    tree = _load_taxonomy(cfg, base, labels)
    out = _out_dir(cfg, base, args)
    input_path = _require_file(
        _resolve(base, args.input) if args.input else out / "train.aug.jsonl", "augmented train file"
    )
    try:
        pg_cfg = pairgen.PairGenConfig(
            k=float(cfg["pairs"]["k"]),
            negatives_per_positive=int(cfg["pairs"]["negatives_per_positive"]),
            target_zero_fraction=float(cfg["pairs"]["target_zero_fraction"]),
            seed=int(cfg["seed"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    dataset = corpus.load_records(input_path, labels)
    pairs = pairgen.generate(dataset, catalog, tree, pg_cfg)
    final = pairgen.undersample_zeros(pairs, pg_cfg.target_zero_fraction, pg_cfg.seed)

    _atomic_write(out / "pairs.jsonl", lambda p: pairgen.save_pairs(final, p))
    report = {
        "pre_undersampling": {str(s): [n, frac] for s, (n, frac) in pairgen.distribution_report(pairs).items()},
        "post_undersampling": {str(s): [n, frac] for s, (n, frac) in pairgen.distribution_report(final).items()},
    }
    _write_json(report, out / "pair_distribution.json")

    print(f"records: {len(dataset.records)}, pairs: {len(pairs)} -> {len(final)} after zero undersampling")
    for score, (n, frac) in pairgen.distribution_report(final).items():
        print(f"score {score}: {n} ({frac:.1%})")
    return 0


def _train_config(cfg: dict) -> simtrain.TrainConfig:
    t = cfg["train"]
    try:
        return simtrain.TrainConfig(
            learning_rate=float(t["learning_rate"]),
            epochs=int(t["epochs"]),
            batch_size=int(t["batch_size"]),
            margin=float(t["margin"]),
            mnrl_scale=float(t["mnrl_scale"]),
            binary_threshold=float(t["binary_threshold"]),
            seed=int(cfg["seed"]),
            head_dim=t["head_dim"] if t["head_dim"] is None else int(t["head_dim"]),
            init_noise=float(t["init_noise"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_train_head(args, cfg: dict, base: Path) -> int:
    out = _out_dir(cfg, base, args)
    pairs_path = _require_file(
        _resolve(base, args.input) if args.input else out / "pairs.jsonl", "pairs file"
    )
    tc = _train_config(cfg)
    pairs = pairgen.load_pairs(pairs_path)
    if not pairs:
        raise ConfigError(f"pairs file {pairs_path} is empty")

    unique_texts = list(dict.fromkeys([p.anchor for p in pairs] + [p.other for p in pairs]))
    backend = _build_fresh_backend(cfg, unique_texts)
    in_dim = backend.dim() if not isinstance(backend, RemoteEmbeddingClient) else (
        cfg["embed"]["service_dim"] or backend.embed_batch(unique_texts[:1]).shape[1]
    )
    out_dim = tc.head_dim or in_dim
    if in_dim * out_dim > _HEAD_WEIGHT_BUDGET:
        raise ConfigError(
            f"head of {out_dim}x{in_dim} weights exceeds the trainable budget; "
            "lower embed.dim or set train.head_dim"
        )

    head, trace = simtrain.train(pairs, backend, tc)
    doc = {
        "embedder": _embedder_doc(backend),
        "head": {"out_dim": head.out_dim, "in_dim": head.in_dim, "weights": head.weights.tolist()},
    }
    _atomic_write(out / "head.json", lambda p: p.write_text(json.dumps(doc) + "\n", "utf-8"))
    _atomic_write(out / "loss_trace.csv", lambda p: simtrain.save_trace(trace, p))

    if trace:
        last = trace[-1]
        print(f"epoch {last.epoch}: mnrl={last.mnrl:.6f} contrastive={last.contrastive:.6f} total={last.total:.6f}")
    print(f"wrote {out / 'head.json'}")
    return 0


def cmd_train_baseline(args, cfg: dict, base: Path) -> int:
    catalog, labels = _load_catalog_and_labels(cfg, base)
    out = _out_dir(cfg, base, args)
    input_path = _require_file(
        _resolve(base, args.input) if args.input else out / "train.aug.jsonl", "augmented train file"
    )
    dataset = corpus.load_records(input_path, labels)
    if not dataset.records:
        raise ConfigError(f"augmented train file {input_path} is empty")
    surfaces = [r.surface for r in dataset.records]
    backend = _build_fresh_backend(cfg, surfaces)
    c = cfg["classifier"]
    clf = ranking.train_softmax_classifier(
        dataset,
        backend,
        catalog,
        learning_rate=float(c["learning_rate"]),
        epochs=int(c["epochs"]),
        seed=int(cfg["seed"]),
    )
    doc = {
        "embedder": _embedder_doc(backend),
        "classifier": {
            "weights": clf.weights_.tolist(),
            "bias": clf.bias_.tolist(),
            "n_classes": clf.n_classes_,
        },
    }
    _atomic_write(out / "classifier.json", lambda p: p.write_text(json.dumps(doc) + "\n", "utf-8"))
    train_acc = float(np.mean(clf.predict(surfaces) == [r.label.index for r in dataset.records]))
    print(f"training accuracy: {train_acc:.3f}")
    print(f"wrote {out / 'classifier.json'}")
    return 0


def _group_occurrences(dataset: corpus.Dataset) -> tuple[list[str], dict[str, list[str]]]:
    order: list[str] = []
    groups: dict[str, list[str]] = {}
    for rec in dataset.records:
        if rec.term not in groups:
            groups[rec.term] = []
            order.append(rec.term)
        groups[rec.term].append(rec.surface)
    return order, groups


def cmd_rank(args, cfg: dict, base: Path) -> int:
    catalog, labels = _load_catalog_and_labels(cfg, base)
    out = _out_dir(cfg, base, args)
    input_path = _require_file(
        _resolve(base, args.input) if args.input else out / "validation.aug.jsonl", "augmented input file"
    )
    dataset = corpus.load_records(input_path, labels)
    order, groups = _group_occurrences(dataset)
    if not order:
        raise ConfigError(f"input file {input_path} has no records")

    if args.method == "similarity":
        model_path = _require_file(
            _resolve(base, args.model) if args.model else out / "head.json", "head model file"
        )
        with open(model_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        backend = _backend_from_doc(doc["embedder"])
        head = simtrain.ProjectionHead(weights=np.asarray(doc["head"]["weights"], dtype=np.float64))
        ranker = ranking.HypernymRanker(backend=backend, head=head).fit(catalog)
        preds = [ranker.rank(term, groups[term]) for term in order]
    else:
        model_path = _require_file(
            _resolve(base, args.model) if args.model else out / "classifier.json", "classifier model file"
        )
        with open(model_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        backend = _backend_from_doc(doc["embedder"])
        clf = ranking.SoftmaxTextClassifier(backend=backend, n_classes=int(doc["classifier"]["n_classes"]))
        clf.weights_ = np.asarray(doc["classifier"]["weights"], dtype=np.float64)
        clf.bias_ = np.asarray(doc["classifier"]["bias"], dtype=np.float64)
        clf.n_classes_ = int(doc["classifier"]["n_classes"])
        preds = [ranking.classify_term(term, groups[term], clf, backend, catalog) for term in order]

    predictions_path = _resolve(base, args.predictions) if args.predictions else out / "predictions.jsonl"
    _atomic_write(predictions_path, lambda p: ranking.save_predictions(preds, p))
    print(f"ranked {len(preds)} terms -> {predictions_path}")
    return 0


def _validate_prediction(pred: ranking.RankedPrediction, labels: corpus.LabelSet) -> None:
    if sorted(pred.ranked_labels) != sorted(labels.names):
        raise ValueError(f"prediction for {pred.term!r} is not a permutation of the catalog labels")
    if any(pred.scores[i] < pred.scores[i + 1] for i in range(len(pred.scores) - 1)):
        raise ValueError(f"prediction for {pred.term!r} has increasing scores")


def cmd_evaluate(args, cfg: dict, base: Path) -> int:
    _, labels = _load_catalog_and_labels(cfg, base)
    out = _out_dir(cfg, base, args)
    gold_path = _require_file(
        _resolve(base, args.gold) if args.gold else out / "validation.terms.jsonl", "gold terms file"
    )
    predictions_path = _require_file(
        _resolve(base, args.predictions) if args.predictions else out / "predictions.jsonl",
        "predictions file",
    )
    gold_terms = corpus.load_labeled_terms(gold_path, labels)
    preds = ranking.load_predictions(predictions_path)

    by_term: dict[str, ranking.RankedPrediction] = {}
    for pred in preds:
        _validate_prediction(pred, labels)
        by_term.setdefault(pred.term, pred)

    gold_pairs = []
    aligned = []
    for t in gold_terms:
        if t.term not in by_term:
            raise ValueError(f"no prediction for gold term {t.term!r}")
        gold_pairs.append((t.term, t.label.name))
        aligned.append(by_term[t.term])

    acc = ranking.accuracy(gold_pairs, aligned)
    mr = ranking.mean_rank(gold_pairs, aligned)
    report = ranking.EvalReport(accuracy=acc, mean_rank=mr, n=len(gold_pairs))
    report_path = _resolve(base, args.report) if args.report else out / "report.json"
    _atomic_write(report_path, lambda p: ranking.save_report(report, p))
    print(f"accuracy={acc} mean_rank={mr} n={len(gold_pairs)}")
    return 0


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperank",
        description=(
            "Financial hypernym ranking pipeline: term augmentation, "
            "taxonomy-graded pair generation, similarity training, ranking, "
            "and evaluation. Stage defaults: 80/20 train split, ratio "
            "thresholds 1.0/1.25, k=0.4, 10 negatives per positive, 30% "
            "zero fraction, margin 0.5, 25 epochs, batch size 20."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--seed", type=int, help="master random seed (default 42)")
    common.add_argument("--offline", action="store_true", help="resolve lookups from the local cache only")
    common.add_argument("--out-dir", help="artifact directory (default ./out)")

    sub = parser.add_subparsers(dest="command", required=True)

    def add_command(name: str, text: str):
        # help= is %-expanded by argparse, description= is printed verbatim
        return sub.add_parser(name, parents=[common], help=text.replace("%", "%%"), description=text)

    p = add_command(
        "extract-acronyms",
        "extract short/long pairs from a text corpus and apply the four exclusion rules",
    )
    p.add_argument("--corpus-dir", help="directory of plain-text documents")
    p.add_argument("--out", help="acronym table output path (default <out-dir>/acronyms.json)")
    p.set_defaults(handler=cmd_extract_acronyms)

    p = add_command(
        "augment",
        "split terms (default 80/20) and attach expansions and glossary definitions "
        "(ratio thresholds 1.0/1.25)",
    )
    p.add_argument("--terms", help="labeled terms JSONL file")
    p.set_defaults(handler=cmd_augment)

    p = add_command(
        "gen-pairs",
        "emit graded similarity pairs (defaults: k=0.4, 10 negatives per positive, "
        "30% zero fraction after undersampling)",
    )
    p.add_argument("--input", help="augmented train file (default <out-dir>/train.aug.jsonl)")
    p.set_defaults(handler=cmd_gen_pairs)

    p = add_command(
        "train-head",
        "train the projection head (defaults: learning rate 2e-5, 25 epochs, "
        "batch size 20, margin 0.5)",
    )
    p.add_argument("--input", help="pairs file (default <out-dir>/pairs.jsonl)")
    p.set_defaults(handler=cmd_train_head)

    p = add_command(
        "train-baseline",
        "train the softmax classification baseline over backend embeddings",
    )
    p.add_argument("--input", help="augmented train file (default <out-dir>/train.aug.jsonl)")
    p.set_defaults(handler=cmd_train_baseline)

    p = add_command(
        "rank",
        "rank all catalog labels for each term of an augmented file",
    )
    p.add_argument("--input", help="augmented input file (default <out-dir>/validation.aug.jsonl)")
    p.add_argument("--method", choices=("similarity", "classifier"), default="similarity")
    p.add_argument("--model", help="model file (default head.json / classifier.json in out-dir)")
    p.add_argument("--predictions", help="predictions output path")
    p.set_defaults(handler=cmd_rank)

    p = add_command(
        "evaluate",
        "score predictions against gold labels (top-1 accuracy and mean rank)",
    )
    p.add_argument("--gold", help="gold labeled terms file (default <out-dir>/validation.terms.jsonl)")
    p.add_argument("--predictions", help="predictions file (default <out-dir>/predictions.jsonl)")
    p.add_argument("--report", help="report output path (default <out-dir>/report.json)")
    p.set_defaults(handler=cmd_evaluate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, base = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return args.handler(args, cfg, base)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: bad data, unreachable service, ...
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
