"""Similarity/classifier ranking, occurrence averaging, and the two metrics."""

import math

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from hyperank.corpus import AugmentedRecord, CatalogEntry, Dataset, LabelCatalog, LabelSet, Source
from hyperank.embed import HashingTfidfEmbedder, cosine
from hyperank.ranking import (
    EvalReport,
    HypernymRanker,
    RankedPrediction,
    SoftmaxTextClassifier,
    accuracy,
    classify_term,
    load_predictions,
    mean_rank,
    rank_term,
    save_predictions,
    save_report,
    train_softmax_classifier,
)
from hyperank.simtrain import ProjectionHead


def _two_label_catalog():
    labels = LabelSet(["A", "B"])
    return LabelCatalog([CatalogEntry(lab, f"def{lab.name}") for lab in labels])


def _occ_vector(cos_a, cos_b):
    # 3-d unit vector whose cosines against e1/e2 are cos_a/cos_b.
    rest = 1.0 - cos_a * cos_a - cos_b * cos_b
    assert rest >= 0
    return np.array([cos_a, cos_b, math.sqrt(rest)])


class TestRankTerm:
    def test_identical_text_ranks_first_with_score_one(self, toy_catalog):
        backend = HashingTfidfEmbedder(n_features=256).fit(
            [toy_catalog.definition_of(lab) for lab in toy_catalog.labels()]
        )
        definition = toy_catalog.definition_of("Bonds")
        pred = rank_term("callable bond", [definition], toy_catalog, backend)
        assert pred.ranked_labels[0] == "Bonds"
        assert pred.scores[0] == pytest.approx(1.0, abs=1e-12)

    def test_occurrence_averaging(self, stub_backend_factory):
        catalog = _two_label_catalog()
        backend = stub_backend_factory(
            {
                "defA": np.array([1.0, 0.0, 0.0]),
                "defB": np.array([0.0, 1.0, 0.0]),
                "occ1": _occ_vector(0.9, 0.1),
                "occ2": _occ_vector(0.2, 0.8),
            }
        )
        pred = rank_term("t", ["occ1", "occ2"], catalog, backend)
        assert pred.ranked_labels == ("A", "B")
        assert pred.scores[0] == pytest.approx(0.55, abs=1e-12)
        assert pred.scores[1] == pytest.approx(0.45, abs=1e-12)

    def test_tie_breaks_by_canonical_index(self, stub_backend_factory):
        catalog = _two_label_catalog()
        backend = stub_backend_factory(
            {
                "defA": np.array([1.0, 0.0, 0.0]),
                "defB": np.array([0.0, 1.0, 0.0]),
                "occ": _occ_vector(0.5, 0.5),
            }
        )
        pred = rank_term("t", ["occ"], catalog, backend)
        assert pred.ranked_labels == ("A", "B")

    def test_zero_occurrence_skipped_with_warning(self, stub_backend_factory):
        catalog = _two_label_catalog()
        backend = stub_backend_factory(
            {
                "defA": np.array([1.0, 0.0, 0.0]),
                "defB": np.array([0.0, 1.0, 0.0]),
                "zero": np.zeros(3),
                "occ": _occ_vector(0.9, 0.1),
            }
        )
        with pytest.warns(UserWarning, match="zero vector"):
            pred = rank_term("t", ["zero", "occ"], catalog, backend)
        assert pred.scores[0] == pytest.approx(0.9, abs=1e-12)

    def test_all_zero_occurrences_error(self, stub_backend_factory):
        catalog = _two_label_catalog()
        backend = stub_backend_factory(
            {"defA": np.array([1.0, 0.0, 0.0]), "defB": np.array([0.0, 1.0, 0.0]), "zero": np.zeros(3)}
        )
        with pytest.warns(UserWarning):
            with pytest.raises(ValueError):
                rank_term("t", ["zero"], catalog, backend)

    def test_order_invariant_aggregation(self, stub_backend_factory):
        catalog = _two_label_catalog()
        mapping = {
            "defA": np.array([1.0, 0.0, 0.0]),
            "defB": np.array([0.0, 1.0, 0.0]),
        }
        rng = np.random.default_rng(0)
        occs = []
        for i in range(7):
            v = rng.normal(size=3)
            mapping[f"o{i}"] = v / np.linalg.norm(v)
            occs.append(f"o{i}")
        backend = stub_backend_factory(mapping)
        base = rank_term("t", occs, catalog, backend)
        for perm_seed in range(5):
            perm = list(np.random.default_rng(perm_seed).permutation(occs))
            assert rank_term("t", perm, catalog, backend) == base

    def test_single_occurrence_matches_raw_cosine_ranking(self, canonical_labels):
        catalog = LabelCatalog(
            [CatalogEntry(lab, f"{lab.name.lower()} meaning number {i}") for i, lab in enumerate(canonical_labels)]
        )
        defs = [catalog.definition_of(lab) for lab in catalog.labels()]
        backend = HashingTfidfEmbedder(n_features=1024).fit(defs)
        occurrence = "securities restriction rules"
        head = ProjectionHead(np.eye(1024))
        pred = rank_term("q", [occurrence], catalog, backend, head=head)

        occ_vec = backend.embed_batch([occurrence])[0]
        brute = sorted(
            (
                (-cosine(occ_vec, backend.embed_batch([catalog.definition_of(lab)])[0]), lab.index, lab.name)
                for lab in catalog.labels()
            ),
        )
        assert list(pred.ranked_labels) == [name for _, _, name in brute]


class TestHypernymRanker:
    def test_matches_rank_term(self, toy_catalog):
        defs = [toy_catalog.definition_of(lab) for lab in toy_catalog.labels()]
        backend = HashingTfidfEmbedder(n_features=256).fit(defs)
        ranker = HypernymRanker(backend=backend).fit(toy_catalog)
        term, occs = "x", ["coupon maturity", "issuer redemption"]
        assert ranker.rank(term, occs) == rank_term(term, occs, toy_catalog, backend)

    def test_predict_batch(self, toy_catalog):
        defs = [toy_catalog.definition_of(lab) for lab in toy_catalog.labels()]
        backend = HashingTfidfEmbedder(n_features=256).fit(defs)
        ranker = HypernymRanker(backend=backend).fit(toy_catalog)
        preds = ranker.predict([("a", ["coupon"]), ("b", ["dividend"])])
        assert [p.term for p in preds] == ["a", "b"]

    def test_requires_fit(self):
        with pytest.raises(NotFittedError):
            HypernymRanker(backend=None).rank("t", ["x"])


class TestSoftmaxClassifier:
    def _separable(self):
        texts = [f"alpha one {i}" for i in range(10)] + [f"beta two {i}" for i in range(10)]
        y = [0] * 10 + [1] * 10
        backend = HashingTfidfEmbedder(n_features=256).fit(texts)
        return texts, y, backend

    def test_separable_training_accuracy(self):
        texts, y, backend = self._separable()
        clf = SoftmaxTextClassifier(backend=backend, epochs=300, seed=0).fit(texts, y)
        assert np.mean(clf.predict(texts) == np.asarray(y)) == 1.0

    def test_probabilities_sum_to_one(self):
        texts, y, backend = self._separable()
        clf = SoftmaxTextClassifier(backend=backend, epochs=50, seed=0).fit(texts, y)
        probs = clf.predict_proba(texts)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_deterministic(self):
        texts, y, backend = self._separable()
        a = SoftmaxTextClassifier(backend=backend, epochs=40, seed=5).fit(texts, y)
        b = SoftmaxTextClassifier(backend=backend, epochs=40, seed=5).fit(texts, y)
        assert np.array_equal(a.weights_, b.weights_)
        assert np.array_equal(a.bias_, b.bias_)

    def test_single_class_rejected(self):
        texts, _, backend = self._separable()
        with pytest.raises(ValueError, match="single class"):
            SoftmaxTextClassifier(backend=backend).fit(texts, [0] * len(texts))

    def test_train_softmax_classifier_on_dataset(self, toy_labels, toy_catalog):
        labels = list(toy_labels)
        records = []
        for i in range(8):
            records.append(AugmentedRecord(f"b{i}", f"coupon issuer {i}", labels[0], Source.ORIGINAL))
            records.append(AugmentedRecord(f"s{i}", f"dividend ticker {i}", labels[1], Source.ORIGINAL))
            records.append(AugmentedRecord(f"f{i}", f"portfolio mandate {i}", labels[2], Source.ORIGINAL))
        ds = Dataset(records)
        backend = HashingTfidfEmbedder(n_features=256).fit([r.surface for r in records])
        clf = train_softmax_classifier(ds, backend, toy_catalog, epochs=300, seed=0)
        assert clf.n_classes_ == 3
        preds = clf.predict([r.surface for r in records])
        assert np.mean(preds == np.array([r.label.index for r in records])) == 1.0


class TestClassifyTerm:
    def test_probability_averaging(self, stub_backend_factory, toy_catalog):
        # Two occurrences with different embeddings; the averaged probability
        # vector must still sum to 1 and rank deterministically.
        rng = np.random.default_rng(2)
        mapping = {"o1": rng.normal(size=8), "o2": rng.normal(size=8)}
        backend = stub_backend_factory(mapping)
        clf = SoftmaxTextClassifier(backend=backend, n_classes=3)
        clf.weights_ = rng.normal(size=(3, 8))
        clf.bias_ = np.zeros(3)
        clf.n_classes_ = 3
        pred = classify_term("t", ["o1", "o2"], clf, backend, toy_catalog)
        assert sum(pred.scores) == pytest.approx(1.0, abs=1e-9)
        p1 = clf.predict_proba_features(mapping["o1"][None])[0]
        p2 = clf.predict_proba_features(mapping["o2"][None])[0]
        averaged = (p1 + p2) / 2
        best = int(np.argmax(averaged))
        assert pred.ranked_labels[0] == list(toy_catalog.labels())[best].name

    def test_single_occurrence_matches_own_probability_order(self, stub_backend_factory, toy_catalog):
        rng = np.random.default_rng(4)
        mapping = {"o": rng.normal(size=8)}
        backend = stub_backend_factory(mapping)
        clf = SoftmaxTextClassifier(backend=backend, n_classes=3)
        clf.weights_ = rng.normal(size=(3, 8))
        clf.bias_ = np.zeros(3)
        clf.n_classes_ = 3
        pred = classify_term("t", ["o"], clf, backend, toy_catalog)
        probs = clf.predict_proba_features(mapping["o"][None])[0]
        expected = [list(toy_catalog.labels())[i].name for i in np.argsort(-probs, kind="stable")]
        assert list(pred.ranked_labels) == expected


def _pred(term, names, scores=None):
    scores = scores or tuple(float(len(names) - i) for i in range(len(names)))
    return RankedPrediction(term=term, ranked_labels=tuple(names), scores=tuple(scores))


def _preds_with_gold_positions(positions, n_labels=17):
    names = [f"L{i}" for i in range(n_labels)]
    gold, preds = [], []
    for i, pos in enumerate(positions):
        ranked = list(names)
        gold_label = ranked[pos - 1]
        gold.append((f"t{i}", gold_label))
        preds.append(_pred(f"t{i}", ranked))
    return gold, preds


class TestMetrics:
    def test_oracle_positions(self):
        gold, preds = _preds_with_gold_positions([1, 1, 3, 2])
        assert accuracy(gold, preds) == 0.5
        assert mean_rank(gold, preds) == 1.75

    def test_perfect(self):
        gold, preds = _preds_with_gold_positions([1, 1, 1])
        assert accuracy(gold, preds) == 1.0
        assert mean_rank(gold, preds) == 1.0

    def test_none_correct(self):
        gold, preds = _preds_with_gold_positions([2, 3, 4])
        assert accuracy(gold, preds) == 0.0

    def test_gold_always_last(self):
        gold, preds = _preds_with_gold_positions([17, 17])
        assert mean_rank(gold, preds) == 17.0

    def test_term_mismatch_rejected(self):
        gold, preds = _preds_with_gold_positions([1, 2])
        gold[1] = ("different", gold[1][1])
        with pytest.raises(ValueError, match="different"):
            accuracy(gold, preds)

    def test_length_mismatch_rejected(self):
        gold, preds = _preds_with_gold_positions([1, 2])
        with pytest.raises(ValueError):
            mean_rank(gold[:1], preds)

    def test_missing_gold_label_rejected(self):
        gold, preds = _preds_with_gold_positions([1])
        gold[0] = (gold[0][0], "NotALabel")
        with pytest.raises(ValueError, match="NotALabel"):
            mean_rank(gold, preds)

    def test_cross_metric_consistency_random(self):
        rng = np.random.default_rng(99)
        names = [f"L{i}" for i in range(17)]
        for _ in range(25):
            n = int(rng.integers(1, 40))
            gold, preds = [], []
            for i in range(n):
                order = list(rng.permutation(names))
                gold.append((f"t{i}", str(rng.choice(names))))
                preds.append(_pred(f"t{i}", order))
            acc = accuracy(gold, preds)
            positions = [preds[i].ranked_labels.index(gold[i][1]) + 1 for i in range(n)]
            assert acc == sum(1 for p in positions if p == 1) / n
            assert 1.0 <= mean_rank(gold, preds) <= 17.0


class TestPredictionIO:
    def test_roundtrip(self, tmp_path):
        preds = [_pred("a", ["X", "Y"], (0.9, 0.1)), _pred("b", ["Y", "X"], (0.7, 0.3))]
        path = tmp_path / "preds.jsonl"
        save_predictions(preds, path)
        assert load_predictions(path) == preds

    def test_report_file(self, tmp_path):
        path = tmp_path / "report.json"
        save_report(EvalReport(accuracy=0.5, mean_rank=1.75, n=4), path)
        import json

        assert json.loads(path.read_text()) == {"accuracy": 0.5, "mean_rank": 1.75, "n": 4}
