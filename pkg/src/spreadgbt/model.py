"""Boosted tree ensembles: data model and prediction semantics.

A tree is written as nested :class:`Leaf` / :class:`Split` records and
compiled into flat arrays by :class:`Tree`; the flat form is what the
prediction, geometry and solver code walks. Feature indices are 0-based.
An instance ``x`` goes left at ``Split(f, v, ...)`` iff ``x[f] <= v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .errors import InputError, StructureError


@dataclass(frozen=True)
class Leaf:
    score: float


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


class InverseLink(str, Enum):
    """Monotonically increasing map applied to the raw score before thresholding."""

    IDENTITY = "identity"
    LOGISTIC = "logistic"

    def __call__(self, s: float) -> float:
        if self is InverseLink.IDENTITY:
            return s
        if s >= 0:
            return 1.0 / (1.0 + math.exp(-s))
        e = math.exp(s)
        return e / (1.0 + e)


class Tree:
    """A regression tree compiled to parallel arrays.

    Node 0 is the root. ``feature[n] == -1`` marks a leaf. Leaves are numbered
    ``0..n_leaves-1`` in left-to-right order; ``leaf_id[n]`` maps a node to
    its leaf number and ``leaf_node[j]`` maps back.
    """

    __slots__ = ("root", "feature", "threshold", "left", "right", "score",
                 "leaf_id", "leaf_node", "depth", "edge")

    def __init__(self, root: Node):
        self.root = root
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.score: list[float] = []
        self.leaf_id: list[int] = []
        self.leaf_node: list[int] = []
        self.depth = self._flatten(root, 0)
        # edge[n]: (feature, lo, hi) of node n's region on its parent's split feature
        self.edge: list = [None] * len(self.feature)
        stack = [(0, {})]
        while stack:
            n, bounds = stack.pop()
            f = self.feature[n]
            if f < 0:
                continue
            v = self.threshold[n]
            lo, hi = bounds.get(f, (-math.inf, math.inf))
            for child, b in ((self.left[n], (lo, min(hi, v))), (self.right[n], (max(lo, v), hi))):
                self.edge[child] = (f, b[0], b[1])
                stack.append((child, {**bounds, f: b}))

    def _flatten(self, node: Node, level: int) -> int:
        idx = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.score.append(math.nan)
        self.leaf_id.append(-1)
        if isinstance(node, Leaf):
            self.score[idx] = float(node.score)
            self.leaf_id[idx] = len(self.leaf_node)
            self.leaf_node.append(idx)
            return level
        if not isinstance(node, Split):
            raise InputError(f"not a tree node: {node!r}")
        if node.feature < 0:
            raise StructureError(f"negative feature index {node.feature}")
        if not math.isfinite(node.threshold):
            raise InputError(f"non-finite threshold {node.threshold}")
        self.feature[idx] = int(node.feature)
        self.threshold[idx] = float(node.threshold)
        self.left[idx] = len(self.feature)
        dl = self._flatten(node.left, level + 1)
        self.right[idx] = len(self.feature)
        dr = self._flatten(node.right, level + 1)
        return max(dl, dr)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_node)

    def leaf_score(self, leaf: int) -> float:
        return self.score[self.leaf_node[leaf]]

    def max_feature(self) -> int:
        return max(self.feature, default=-1)

    def thresholds(self):
        """Yield ``(feature, threshold)`` for every internal node."""
        for f, v in zip(self.feature, self.threshold):
            if f >= 0:
                yield f, v

    def __repr__(self):
        return f"Tree(n_nodes={self.n_nodes}, n_leaves={self.n_leaves}, depth={self.depth})"


def _as_tree(t) -> Tree:
    return t if isinstance(t, Tree) else Tree(t)


def _check_instance(x, n_features: int | None = None):
    if n_features is not None and len(x) < n_features:
        raise StructureError(f"instance has {len(x)} features, model expects {n_features}")


def original_leaf(tree: Tree, x: Sequence[float]) -> int:
    """Leaf number reached by ``x`` under the standard traversal."""
    feature, threshold = tree.feature, tree.threshold
    left, right = tree.left, tree.right
    n = 0
    try:
        while feature[n] >= 0:
            n = left[n] if x[feature[n]] <= threshold[n] else right[n]
    except IndexError:
        raise StructureError(
            f"feature {feature[n]} out of range for instance of length {len(x)}") from None
    return tree.leaf_id[n]


def tree_predict(tree: Tree, x: Sequence[float]) -> float:
    return tree.leaf_score(original_leaf(tree, x))


@dataclass(frozen=True, eq=False)
class Ensemble:
    """An additive ensemble of regression trees with link and threshold.

    ``base_score`` is a constant added to the raw sum (LightGBM's init
    score); it defaults to 0.
    """

    trees: tuple
    n_features: int
    link: InverseLink = InverseLink.IDENTITY
    tau: float = 0.0
    base_score: float = 0.0

    def __post_init__(self):
        trees = tuple(_as_tree(t) for t in self.trees)
        if not trees:
            raise InputError("an ensemble needs at least one tree")
        if self.n_features < 1:
            raise InputError("n_features must be positive")
        for i, t in enumerate(trees):
            if t.max_feature() >= self.n_features:
                raise StructureError(
                    f"tree {i} uses feature {t.max_feature()} but n_features={self.n_features}")
        object.__setattr__(self, "trees", trees)
        object.__setattr__(self, "link", InverseLink(self.link))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "base_score", float(self.base_score))

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_nodes(self) -> int:
        return sum(t.n_nodes for t in self.trees)

    @property
    def max_depth(self) -> int:
        return max(t.depth for t in self.trees)

    def raw_predict(self, x: Sequence[float]) -> float:
        _check_instance(x, self.n_features)
        total = self.base_score
        for t in self.trees:
            total += tree_predict(t, x)
        return total

    def label_for_score(self, raw: float) -> int:
        return 1 if self.link(raw) >= self.tau else -1

    def classify(self, x: Sequence[float]) -> int:
        return self.label_for_score(self.raw_predict(x))

    def predict(self, X) -> np.ndarray:
        """Vectorised labels for a 2-d array of instances."""
        return np.array([self.classify(row) for row in np.asarray(X, dtype=float)], dtype=int)


def raw_predict(ensemble: Ensemble, x) -> float:
    return ensemble.raw_predict(x)


def classify(ensemble: Ensemble, x) -> int:
    return ensemble.classify(x)


@dataclass(frozen=True)
class Attacker:
    """Norm-bounded attacker ``{z : ||z - x||_p <= k}``.

    ``p`` is a non-negative integer or ``math.inf``. ``ell`` is the decimal
    precision used to integerise ``L_p`` weights; it is ignored for 0 and inf.
    """

    p: float
    k: float
    ell: int = 6

    def __post_init__(self):
        p = self.p
        if p != math.inf:
            if p < 0 or int(p) != p:
                raise InputError(f"norm order must be 0, a positive integer or inf, got {p}")
            object.__setattr__(self, "p", int(p))
        if not (self.k >= 0) or math.isnan(self.k):
            raise InputError(f"budget must be >= 0, got {self.k}")
        if p == 0 and int(self.k) != self.k:
            raise InputError(f"L0 budget must be an integer, got {self.k}")
        if self.ell < 0 or int(self.ell) != self.ell:
            raise InputError(f"precision ell must be a non-negative integer, got {self.ell}")
        object.__setattr__(self, "k", float(self.k))

    @property
    def is_inf(self) -> bool:
        return self.p == math.inf

    @classmethod
    def parse(cls, norm: str | float, k: float, ell: int = 6) -> "Attacker":
        if isinstance(norm, str):
            s = norm.strip().lower()
            if s in ("inf", "infinity", "linf"):
                p = math.inf
            else:
                try:
                    p = int(s)
                except ValueError:
                    raise InputError(f"unrecognised norm {norm!r}") from None
        else:
            p = norm
        return cls(p, k, ell)

    @property
    def norm_name(self) -> str:
        return "inf" if self.is_inf else str(self.p)
