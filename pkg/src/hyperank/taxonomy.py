"""Label hierarchy and graded pairwise label similarity.

The hierarchy is data, not code: a JSON file of nested ``{"name",
"children"}`` objects (a single root or an array of roots). Leaves must be
exactly the catalog labels. Two labels score 1.0 when identical, 0.0 when
their roots differ, k when only the roots match and 2k when the depth-1
ancestors match as well.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .corpus import LabelId, LabelSet

__all__ = [
    "TaxonomyNode",
    "Taxonomy",
    "load_taxonomy",
    "default_taxonomy_path",
    "root_and_first_child",
    "pair_score",
]


@dataclass(frozen=True)
class TaxonomyNode:
    name: str
    children: tuple["TaxonomyNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class Taxonomy:
    """Validated label forest with precomputed root-to-leaf paths."""

    roots: tuple[TaxonomyNode, ...]
    leaf_paths: dict[str, tuple[str, ...]] = field(repr=False)

    def path_of(self, label: LabelId | str) -> tuple[str, ...]:
        name = label.name if isinstance(label, LabelId) else label
        try:
            return self.leaf_paths[name]
        except KeyError:
            raise KeyError(f"label {name!r} is not a leaf of this taxonomy") from None


def _parse_node(obj: dict, where: str) -> TaxonomyNode:
    if not isinstance(obj, dict) or "name" not in obj:
        raise ValueError(f"{where}: node must be an object with a 'name' field")
    children = obj.get("children", [])
    if not isinstance(children, list):
        raise ValueError(f"{where}: 'children' must be a list")
    return TaxonomyNode(
        name=str(obj["name"]),
        children=tuple(_parse_node(c, where) for c in children),
    )


def _walk(node: TaxonomyNode, prefix: tuple[str, ...], names: list[str], leaves: dict[str, tuple[str, ...]]) -> None:
    path = prefix + (node.name,)
    names.append(node.name)
    if node.is_leaf:
        leaves[node.name] = path
    for child in node.children:
        _walk(child, path, names, leaves)


def build_taxonomy(roots: Sequence[TaxonomyNode], labels: Sequence[LabelId] | LabelSet) -> Taxonomy:
    """Validate a parsed forest against the expected leaf label set."""
    names: list[str] = []
    leaves: dict[str, tuple[str, ...]] = {}
    for root in roots:
        _walk(root, (), names, leaves)

    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"duplicate node names in taxonomy: {dupes}")

    expected = {lab.name for lab in labels}
    got = set(leaves)
    missing = sorted(expected - got)
    extra = sorted(got - expected)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing leaves: {missing}")
        if extra:
            parts.append(f"unexpected leaves: {extra}")
        raise ValueError("taxonomy/label mismatch: " + "; ".join(parts))
    return Taxonomy(roots=tuple(roots), leaf_paths=leaves)


def load_taxonomy(path: str | Path, labels: Sequence[LabelId] | LabelSet) -> Taxonomy:
    """Load and validate a taxonomy file (single root object or root array)."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    raw_roots = data if isinstance(data, list) else [data]
    roots = [_parse_node(obj, str(path)) for obj in raw_roots]
    return build_taxonomy(roots, labels)


def default_taxonomy_path() -> Path:
    """Bundled best-effort hierarchy for the canonical 17 labels (editable)."""
    return Path(str(resources.files("hyperank.data").joinpath("default_taxonomy.json")))


def root_and_first_child(taxonomy: Taxonomy, label: LabelId | str) -> tuple[str, str]:
    """Root name and depth-1 ancestor of a leaf.

    A leaf sitting directly under a root is its own first child.
    """
    path = taxonomy.path_of(label)
    return path[0], path[1] if len(path) >= 2 else path[0]


def pair_score(taxonomy: Taxonomy, l1: LabelId | str, l2: LabelId | str, k: float) -> float:
    """Graded similarity of two labels: one of {0, k, 2k, 1}."""
    if not 0.0 < k < 0.5:
        raise ValueError(f"k must be in (0, 0.5), got {k}")
    name1 = l1.name if isinstance(l1, LabelId) else l1
    name2 = l2.name if isinstance(l2, LabelId) else l2
    if name1 == name2:
        return 1.0
    root1, child1 = root_and_first_child(taxonomy, name1)
    root2, child2 = root_and_first_child(taxonomy, name2)
    if root1 != root2:
        return 0.0
    return 2.0 * k if child1 == child2 else k
