"""Hierarchy loading/validation and graded pair scoring, with a brute-force
path-comparison oracle."""

import json

import pytest

from hyperank.corpus import LabelSet
from hyperank.taxonomy import (
    Taxonomy,
    build_taxonomy,
    TaxonomyNode,
    default_taxonomy_path,
    load_taxonomy,
    pair_score,
    root_and_first_child,
)


def oracle_pair_score(taxonomy: Taxonomy, l1: str, l2: str, k: float) -> float:
    """Independent scoring straight from full root-to-leaf paths."""
    if l1 == l2:
        return 1.0
    p1, p2 = taxonomy.path_of(l1), taxonomy.path_of(l2)
    if p1[0] != p2[0]:
        return 0.0
    fc1 = p1[1] if len(p1) > 1 else p1[0]
    fc2 = p2[1] if len(p2) > 1 else p2[0]
    return 2.0 * k if fc1 == fc2 else k


def _write_tree(tmp_path, data):
    path = tmp_path / "tree.json"
    path.write_text(json.dumps(data))
    return path


class TestLoad:
    def test_toy_tree_ok(self, tmp_path):
        labels = LabelSet(["Bonds", "Swap", "Funds"])
        tree = {
            "name": "root",
            "children": [
                {"name": "A", "children": [{"name": "Bonds"}, {"name": "Swap"}]},
                {"name": "B", "children": [{"name": "Funds"}]},
            ],
        }
        t = load_taxonomy(_write_tree(tmp_path, tree), labels)
        assert t.path_of("Bonds") == ("root", "A", "Bonds")

    def test_missing_leaf_named(self, tmp_path):
        labels = LabelSet.canonical()
        with open(default_taxonomy_path(), encoding="utf-8") as fh:
            data = json.load(fh)

        def drop(node):
            node["children"] = [c for c in node.get("children", []) if c["name"] != "Option"]
            for c in node["children"]:
                drop(c)

        for root in data:
            drop(root)
        with pytest.raises(ValueError, match="Option"):
            load_taxonomy(_write_tree(tmp_path, data), labels)

    def test_duplicate_node_name(self, tmp_path):
        labels = LabelSet(["Bonds"])
        tree = {"name": "Bonds", "children": [{"name": "Bonds"}]}
        with pytest.raises(ValueError, match="duplicate"):
            load_taxonomy(_write_tree(tmp_path, tree), labels)

    def test_extra_leaf_rejected(self, tmp_path):
        labels = LabelSet(["Bonds"])
        tree = {"name": "root", "children": [{"name": "Bonds"}, {"name": "Extra"}]}
        with pytest.raises(ValueError, match="Extra"):
            load_taxonomy(_write_tree(tmp_path, tree), labels)

    def test_default_tree_covers_canonical_labels(self):
        labels = LabelSet.canonical()
        t = load_taxonomy(default_taxonomy_path(), labels)
        assert set(t.leaf_paths) == set(labels.names)


class TestRootAndFirstChild:
    @pytest.fixture
    def toy(self):
        labels = LabelSet(["Bonds", "Swap", "Funds"])
        roots = [
            TaxonomyNode(
                "root",
                (
                    TaxonomyNode("A", (TaxonomyNode("Bonds"), TaxonomyNode("Swap"))),
                    TaxonomyNode("B", (TaxonomyNode("Funds"),)),
                ),
            )
        ]
        return build_taxonomy(roots, labels)

    def test_paths(self, toy):
        assert root_and_first_child(toy, "Bonds") == ("root", "A")
        assert root_and_first_child(toy, "Funds") == ("root", "B")

    def test_degenerate_leaf_under_root(self):
        labels = LabelSet(["Stocks"])
        t = build_taxonomy([TaxonomyNode("root", (TaxonomyNode("Stocks"),))], labels)
        assert root_and_first_child(t, "Stocks") == ("root", "Stocks")

    def test_unknown_label(self, toy):
        with pytest.raises(KeyError):
            root_and_first_child(toy, "Nope")


class TestPairScore:
    def test_identity(self, toy_taxonomy):
        assert pair_score(toy_taxonomy, "Bonds", "Bonds", 0.4) == 1.0

    def test_same_root_same_first_child(self):
        labels = LabelSet(["Bonds", "MMIs"])
        t = build_taxonomy(
            [TaxonomyNode("root", (TaxonomyNode("Debt", (TaxonomyNode("Bonds"), TaxonomyNode("MMIs"))),))],
            labels,
        )
        assert pair_score(t, "Bonds", "MMIs", 0.4) == pytest.approx(0.8)

    def test_same_root_different_first_child(self, toy_taxonomy):
        assert pair_score(toy_taxonomy, "Bonds", "Stocks", 0.4) == 0.4

    def test_different_roots(self, toy_taxonomy):
        assert pair_score(toy_taxonomy, "Bonds", "Funds", 0.4) == 0.0

    @pytest.mark.parametrize("bad_k", [0.0, 0.5, 0.6, -0.1])
    def test_k_range(self, toy_taxonomy, bad_k):
        with pytest.raises(ValueError):
            pair_score(toy_taxonomy, "Bonds", "Stocks", bad_k)

    def test_range_and_symmetry_default_tree(self):
        labels = LabelSet.canonical()
        t = load_taxonomy(default_taxonomy_path(), labels)
        k = 0.4
        allowed = {0.0, k, 2 * k, 1.0}
        for a in labels.names:
            for b in labels.names:
                s = pair_score(t, a, b, k)
                assert s in allowed
                assert s == pair_score(t, b, a, k)
                if a == b:
                    assert s == 1.0

    def test_matches_oracle_on_fixtures(self, toy_taxonomy):
        labels = LabelSet.canonical()
        default = load_taxonomy(default_taxonomy_path(), labels)
        for t in (toy_taxonomy, default):
            names = list(t.leaf_paths)
            for a in names:
                for b in names:
                    for k in (0.1, 0.4, 0.49):
                        assert pair_score(t, a, b, k) == oracle_pair_score(t, a, b, k)
