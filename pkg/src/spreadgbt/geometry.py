"""Hyper-rectangle annotation, minimal perturbations and the spread check.

Every node of a tree is annotated with the half-open box ``(lo, hi]`` of
points that traverse it. The minimal perturbation moving ``x`` into a box
is computed per coordinate; when ``x_i <= lo_i`` the attacked coordinate
becomes the smallest float strictly above ``lo_i``.

Budgets are compared through one additive weight per norm: the count of
non-zero coordinates for ``p = 0``, the maximum magnitude for ``p = inf``
and ``sum |d_i|^p`` against ``k^p`` for finite ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .model import Attacker, Ensemble, Tree

INF = math.inf


@dataclass(frozen=True)
class HyperRectangle:
    """Product of half-open intervals ``(lo[i], hi[i]]``."""

    lo: tuple
    hi: tuple

    @classmethod
    def full(cls, d: int) -> "HyperRectangle":
        return cls((-INF,) * d, (INF,) * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def is_empty(self) -> bool:
        return any(l >= h for l, h in zip(self.lo, self.hi))

    def contains(self, x) -> bool:
        return all(l < xi <= h for l, xi, h in zip(self.lo, x, self.hi))

    def intersect(self, other: "HyperRectangle") -> "HyperRectangle":
        return HyperRectangle(
            tuple(max(a, b) for a, b in zip(self.lo, other.lo)),
            tuple(min(a, b) for a, b in zip(self.hi, other.hi)),
        )

    def split(self, f: int, v: float):
        """Boxes of the left (``x_f <= v``) and right children."""
        hi = list(self.hi)
        hi[f] = min(hi[f], v)
        lo = list(self.lo)
        lo[f] = max(lo[f], v)
        return HyperRectangle(self.lo, tuple(hi)), HyperRectangle(tuple(lo), self.hi)


def annotate(tree: Tree, d: int) -> list[HyperRectangle]:
    """Box of every node of ``tree``, indexed by flat node number."""
    boxes: list = [None] * tree.n_nodes
    boxes[0] = HyperRectangle.full(d)
    for n in range(tree.n_nodes):
        f = tree.feature[n]
        if f >= 0:
            boxes[tree.left[n]], boxes[tree.right[n]] = boxes[n].split(f, tree.threshold[n])
    return boxes


def leaf_boxes(tree: Tree, d: int) -> list[HyperRectangle]:
    boxes = annotate(tree, d)
    return [boxes[n] for n in tree.leaf_node]


def coordinate_delta(xi: float, lo: float, hi: float) -> float:
    """Smallest move of ``xi`` into ``(lo, hi]``; the box must be non-empty.

    The returned value ``d`` satisfies ``lo < xi + d <= hi`` in floating point
    whenever some float ``d`` does. If the box is narrower than the rounding
    step at ``xi`` no such ``d`` exists and the nearest real move is returned.
    """
    if xi <= lo:
        d = math.nextafter(lo, INF) - xi
        while xi + d <= lo:
            d = math.nextafter(d, INF)
        if xi + d > hi:
            return lo - xi
        return d
    if xi > hi:
        d = hi - xi
        while xi + d > hi:
            d = math.nextafter(d, -INF)
        if xi + d <= lo:
            return hi - xi
        return d
    return 0.0


def leaf_distance(x, box: HyperRectangle) -> np.ndarray:
    if box.is_empty():
        raise InputError("distance to an empty hyper-rectangle is undefined")
    return np.array([coordinate_delta(float(xi), l, h)
                     for xi, l, h in zip(x, box.lo, box.hi)])


def perturbation_weight(values, p) -> float:
    """Additive weight of a perturbation given its coordinates (in dimension order)."""
    if p == 0:
        return float(sum(1 for v in values if v != 0.0))
    if p == INF:
        return max((abs(v) for v in values), default=0.0)
    total = 0.0
    for v in values:
        if v != 0.0:
            total += abs(v) ** p
    return total


def budget_weight(attacker: Attacker) -> float:
    if attacker.p == 0 or attacker.p == INF:
        return attacker.k
    return attacker.k ** attacker.p


def within_budget(values, attacker: Attacker) -> bool:
    return perturbation_weight(values, attacker.p) <= budget_weight(attacker)


def norm(values, p) -> float:
    w = perturbation_weight(values, p)
    if p == 0 or p == INF:
        return w
    return w ** (1.0 / p)


@dataclass
class ReachableLeaf:
    """A leaf reachable within budget, with its sparse minimal perturbation.

    ``delta`` maps feature index to the non-zero perturbation on that
    feature. ``weight`` is the additive budget weight (see module docs).
    """

    leaf: int
    score: float
    delta: dict
    weight: float

    def norm(self, p) -> float:
        if p == 0 or p == INF:
            return self.weight
        return self.weight ** (1.0 / p)

    def dense_delta(self, d: int) -> np.ndarray:
        out = np.zeros(d)
        for f, v in self.delta.items():
            out[f] = v
        return out


def reachable_leaves(tree: Tree, x, attacker: Attacker) -> list[ReachableLeaf]:
    """Leaves of ``tree`` whose minimal perturbation from ``x`` fits the budget.

    One depth-first pass; per-feature bounds and deltas are kept only for the
    features on the current path, and subtrees are cut as soon as their box
    is empty or out of budget (both only get worse further down).
    """
    p = attacker.p
    cap = budget_weight(attacker)
    feature, threshold = tree.feature, tree.threshold
    left, right, score, leaf_id = tree.left, tree.right, tree.score, tree.leaf_id
    lo: dict = {}
    hi: dict = {}
    delta: dict = {}
    out: list = []

    def weight():
        return perturbation_weight([delta[f] for f in sorted(delta)], p)

    def visit(n):
        f = feature[n]
        if f < 0:
            out.append(ReachableLeaf(leaf_id[n], score[n],
                                     {g: delta[g] for g in sorted(delta)}, weight()))
            return
        v = threshold[n]
        old_lo = lo.get(f, -INF)
        old_hi = hi.get(f, INF)
        old_d = delta.get(f)
        xf = x[f]
        for child, nlo, nhi in ((left[n], old_lo, min(old_hi, v)),
                                (right[n], max(old_lo, v), old_hi)):
            if nlo >= nhi:
                continue
            d = coordinate_delta(xf, nlo, nhi)
            lo[f], hi[f] = nlo, nhi
            if d != 0.0:
                delta[f] = d
            else:
                delta.pop(f, None)
            if weight() <= cap:
                visit(child)
        lo[f], hi[f] = old_lo, old_hi
        if old_d is None:
            delta.pop(f, None)
        else:
            delta[f] = old_d

    visit(0)
    return out


# -- spread ----------------------------------------------------------------

@dataclass
class SpreadReport:
    """p-spread of an ensemble and, when finite, the pair that attains it."""

    p: float
    psi: float
    feature: int | None = None
    trees: tuple | None = None
    thresholds: tuple | None = None
    k: float | None = None
    is_large_spread: bool | None = None

    def to_record(self) -> dict:
        return {
            "norm": "inf" if self.p == INF else int(self.p),
            "psi": None if self.psi == INF else self.psi,
            "feature": self.feature,
            "trees": list(self.trees) if self.trees else None,
            "thresholds": list(self.thresholds) if self.thresholds else None,
            "budget": self.k,
            "large_spread": self.is_large_spread,
        }

    def describe(self) -> str:
        if self.feature is None:
            return "no feature is split on by two different trees"
        if self.p == 0:
            return f"feature {self.feature} is used by trees {self.trees[0]} and {self.trees[1]}"
        return (f"feature {self.feature}: threshold {self.thresholds[0]!r} in tree "
                f"{self.trees[0]} vs {self.thresholds[1]!r} in tree {self.trees[1]} "
                f"(gap {self.psi!r})")


def p_spread(ens: Ensemble, p) -> SpreadReport:
    """Minimum cross-tree threshold gap on a shared feature.

    For ``p = 0`` the gap degenerates to an indicator: 1 when some feature is
    split on by two different trees, ``inf`` otherwise.
    """
    per_feature: dict = {}
    for i, t in enumerate(ens.trees):
        for f, v in t.thresholds():
            per_feature.setdefault(f, []).append((v, i))
    best = SpreadReport(p, INF)
    for f in sorted(per_feature):
        entries = sorted(per_feature[f])
        if p == 0:
            owners = sorted({i for _, i in entries})
            if len(owners) > 1:
                return SpreadReport(p, 1.0, f, tuple(owners[:2]))
            continue
        # a closest cross-tree pair is always adjacent in sorted order
        for (v1, i1), (v2, i2) in zip(entries, entries[1:]):
            if i1 != i2:
                gap = abs(v2 - v1)
                if gap < best.psi:
                    best = SpreadReport(p, gap, f, (i1, i2), (v1, v2))
    return best


def spread_report(ens: Ensemble, attacker: Attacker) -> SpreadReport:
    rep = p_spread(ens, attacker.p)
    rep.k = attacker.k
    if attacker.p == 0:
        rep.is_large_spread = rep.feature is None
    else:
        rep.is_large_spread = rep.psi > 2 * attacker.k
    return rep


def check_large_spread(ens: Ensemble, attacker: Attacker) -> bool:
    return spread_report(ens, attacker).is_large_spread

