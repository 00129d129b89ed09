"""Optimal attack strategy against a large-spread ensemble.

Each tree contributes at most one attacked leaf. Under ``L_inf`` the trees
are independent and the best leaf per tree is picked greedily. Under
``L_0`` and ``L_p`` the per-tree perturbation weights add up, which turns
the problem into a grouped 0-1 knapsack solved by dynamic programming over
integer capacities; ``L_p`` weights are integerised by decimal scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ResourceLimitError
from .geometry import INF, ReachableLeaf, budget_weight, coordinate_delta, reachable_leaves
from .model import Attacker, Ensemble, Tree, original_leaf

EXACT = "exact"
CONSERVATIVE = "conservative"

DEFAULT_MAX_CELLS = 10 ** 8

# relative slack when deciding that a scaled float is an integer; absorbs
# decimal representation noise such as 0.29 * 100 == 28.999999999999996
_INT_RTOL = 1e-9


def adversarial_gain(tree: Tree, x, y: int, leaf: int) -> float:
    """Raw-score advantage towards the wrong class from forcing ``x`` into ``leaf``."""
    s_o = tree.leaf_score(original_leaf(tree, x))
    return gain_from_scores(s_o, tree.leaf_score(leaf), y)


def gain_from_scores(s_orig: float, s_leaf: float, y: int) -> float:
    return s_orig - s_leaf if y == 1 else s_leaf - s_orig


@dataclass
class GainItem:
    tree: int
    leaf: int
    gain: float
    cost: int | float
    target: ReachableLeaf


@dataclass
class SolverResult:
    gamma: float
    selection: dict | None = None
    mode: str = EXACT

    def delta(self, d: int) -> np.ndarray:
        """Sum of the selected per-tree perturbations."""
        out = np.zeros(d)
        for item in (self.selection or {}).values():
            for f, v in item.target.delta.items():
                out[f] += v
        return out


@dataclass
class DPMatrix:
    """``table[i, q]``: best gain using trees ``0..i-1`` with capacity ``q``."""

    table: np.ndarray
    capacity: int
    groups: list = field(default_factory=list)

    @property
    def gamma(self) -> float:
        return float(self.table[-1, -1])


def candidate_items(ens: Ensemble, x, y: int, attacker: Attacker) -> list[list[tuple]]:
    """Per tree, ``(ReachableLeaf, gain)`` for every reachable leaf."""
    out = []
    for t in ens.trees:
        s_o = t.leaf_score(original_leaf(t, x))
        out.append([(r, gain_from_scores(s_o, r.score, y))
                    for r in reachable_leaves(t, x, attacker)])
    return out


def _best_gain_linf(tree: Tree, x, y: int, k: float) -> float:
    """Largest gain over leaves reachable within ``L_inf`` budget ``k`` (at least 0).

    Single pruned traversal. A child only narrows the box on its parent's
    split feature, so one coordinate check per node decides reachability.
    """
    feature, left, right, score, edge = tree.feature, tree.left, tree.right, tree.score, tree.edge
    s_o = tree.leaf_score(original_leaf(tree, x))
    best = s_o
    sign = 1.0 if y == -1 else -1.0
    stack = [0]
    while stack:
        n = stack.pop()
        if feature[n] < 0:
            if sign * (score[n] - best) > 0:
                best = score[n]
            continue
        for c in (left[n], right[n]):
            f, lo, hi = edge[c]
            xf = x[f]
            if lo >= hi:
                continue
            if (xf <= lo or xf > hi) and abs(coordinate_delta(xf, lo, hi)) > k:
                continue
            stack.append(c)
    return gain_from_scores(s_o, best, y)


def solve_linf(ens: Ensemble, x, y: int, attacker: Attacker,
               with_selection: bool = True) -> SolverResult:
    """Greedy per-tree choice; trees do not interact under ``L_inf``."""
    if not with_selection:
        xs = [float(v) for v in x]
        return SolverResult(sum(_best_gain_linf(t, xs, y, attacker.k) for t in ens.trees),
                            None, EXACT)
    gamma = 0.0
    selection = {}
    for i, items in enumerate(candidate_items(ens, x, y, attacker)):
        best = None
        for r, g in items:  # items arrive in leaf order, so ">" keeps the lowest leaf on ties
            if g > 0 and (best is None or g > best.gain):
                best = GainItem(i, r.leaf, g, r.weight, r)
        if best is not None:
            gamma += best.gain
            selection[i] = best
    return SolverResult(gamma, selection, EXACT)


# -- knapsack --------------------------------------------------------------

def knapsack_table(groups: list[list[GainItem]], capacity: int,
                   max_cells: int = DEFAULT_MAX_CELLS) -> DPMatrix:
    """Grouped 0-1 knapsack: at most one item per group, integer costs.

    Row ``i`` keeps ``table[i-1, q]`` (tree left alone) unless some item of
    group ``i`` with cost ``w <= q`` improves on it via ``table[i-1, q-w] + gain``.
    """
    m = len(groups)
    cells = (m + 1) * (capacity + 1)
    if cells > max_cells:
        raise ResourceLimitError(
            f"DP table needs {cells} cells (> {max_cells}); lower the precision ell")
    table = np.zeros((m + 1, capacity + 1))
    for i, items in enumerate(groups, start=1):
        prev = table[i - 1]
        row = prev.copy()
        for it in items:
            w = int(it.cost)
            if w <= capacity:
                np.maximum(row[w:], prev[:capacity + 1 - w] + it.gain, out=row[w:])
        table[i] = row
    return DPMatrix(table, capacity, groups)


def recover_selection(dp: DPMatrix, groups: list[list[GainItem]] | None = None) -> dict:
    """Backtrack one optimal assignment from a solved table.

    Walking from the last tree, the tree is left alone whenever that keeps
    the optimum; otherwise the lowest-numbered leaf achieving it is taken.
    """
    groups = dp.groups if groups is None else groups
    table = dp.table
    q = dp.capacity
    selection = {}
    for i in range(len(groups), 0, -1):
        target = table[i, q]
        if target == table[i - 1, q]:
            continue
        for it in sorted(groups[i - 1], key=lambda it: it.leaf):
            w = int(it.cost)
            if w <= q and table[i - 1, q - w] + it.gain == target:
                selection[it.tree] = it
                q -= w
                break
        else:  # pragma: no cover - the table was built from these items
            raise AssertionError("inconsistent DP table")
    return selection


def eta(value: float, ell: int) -> float:
    """Scale ``value`` by ``10**ell``, snapping to an integer within float noise."""
    scaled = value * 10.0 ** ell
    r = round(scaled)
    if abs(scaled - r) <= _INT_RTOL * max(1.0, abs(scaled)):
        return float(r)
    return scaled


def _is_int(v: float) -> bool:
    return float(v).is_integer()


def _knapsack_solve(candidates, cost_of, capacity, mode, max_cells, with_selection):
    groups = []
    for i, items in enumerate(candidates):
        groups.append([GainItem(i, r.leaf, g, cost_of(r), r) for r, g in items if g > 0])
    # capacity past the heaviest possible pick is never used
    reach = sum(max((it.cost for it in grp), default=0) for grp in groups)
    capacity = int(min(capacity, reach))
    dp = knapsack_table(groups, capacity, max_cells)
    selection = recover_selection(dp, groups) if with_selection else None
    return SolverResult(dp.gamma, selection, mode)


def solve_l0(ens: Ensemble, x, y: int, attacker: Attacker,
             max_cells: int = DEFAULT_MAX_CELLS, with_selection: bool = True) -> SolverResult:
    if attacker.p != 0:
        raise InputError("solve_l0 needs an L0 attacker")
    return _knapsack_solve(candidate_items(ens, x, y, attacker), lambda r: int(r.weight),
                           int(attacker.k), EXACT, max_cells, with_selection)


def solve_lp(ens: Ensemble, x, y: int, attacker: Attacker,
             max_cells: int = DEFAULT_MAX_CELLS, with_selection: bool = True) -> SolverResult:
    """Scaled knapsack for finite ``p >= 1``.

    Weights are ``eta(||delta||_p^p)`` and the capacity ``eta(k^p)``. When all
    of them are integers the answer is exact; otherwise weights are floored
    and the capacity ceiled, which can only over-report attacks.
    """
    p, ell = attacker.p, attacker.ell
    if not (p >= 1 and p != math.inf):
        raise InputError("solve_lp needs a finite norm order p >= 1")
    candidates = candidate_items(ens, x, y, attacker)
    cap = eta(budget_weight(attacker), ell)
    scaled = {id(r): eta(r.weight, ell) for grp in candidates for r, g in grp if g > 0}
    exact = _is_int(cap) and all(_is_int(w) for w in scaled.values())
    capacity = int(cap) if exact else math.ceil(cap)
    return _knapsack_solve(candidates, lambda r: math.floor(scaled[id(r)]), capacity,
                           EXACT if exact else CONSERVATIVE, max_cells, with_selection)


def solve(ens: Ensemble, x, y: int, attacker: Attacker, **kw) -> SolverResult:
    """Dispatch on the attacker's norm."""
    if attacker.p == math.inf:
        return solve_linf(ens, x, y, attacker, kw.get("with_selection", True))
    if attacker.p == 0:
        return solve_l0(ens, x, y, attacker, **kw)
    return solve_lp(ens, x, y, attacker, **kw)
