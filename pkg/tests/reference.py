"""Independent reference implementations used only by the tests.

Everything here works on the nested ``Leaf``/``Split`` form with exact
rationals, so it shares no arithmetic with the package under test. A move
into ``(lo, hi]`` from below needs strictly more than ``lo - x``; that
strictness is tracked symbolically instead of with a float tick.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

from spreadgbt.model import Leaf, Split

INF = math.inf


def leaves(node, lo=None, hi=None):
    """``[(lo, hi, score)]`` per leaf, left to right; bounds are dicts of Fractions."""
    lo = lo or {}
    hi = hi or {}
    if isinstance(node, Leaf):
        return [(dict(lo), dict(hi), node.score)]
    f, v = node.feature, Fraction(node.threshold)
    l_hi = dict(hi)
    l_hi[f] = min(hi.get(f, v), v)
    r_lo = dict(lo)
    r_lo[f] = max(lo.get(f, v), v)
    return leaves(node.left, lo, l_hi) + leaves(node.right, r_lo, hi)


def empty(lo, hi) -> bool:
    return any(f in hi and lo[f] >= hi[f] for f in lo)


def intersect(a, b):
    lo = dict(a[0])
    for f, v in b[0].items():
        lo[f] = max(lo.get(f, v), v)
    hi = dict(a[1])
    for f, v in b[1].items():
        hi[f] = min(hi.get(f, v), v)
    return lo, hi


def needs(x, lo, hi):
    """Per moved feature: ``(amount, strict)``; strict means "more than amount"."""
    out = {}
    for f in set(lo) | set(hi):
        xf = Fraction(float(x[f]))
        if f in lo and xf <= lo[f]:
            out[f] = (lo[f] - xf, True)
        elif f in hi and xf > hi[f]:
            out[f] = (xf - hi[f], False)
    return out


def cost(need_list, p):
    """Combined cost of several independent moves: ``(value, strict)``.

    For ``L_inf`` the maximum, for ``L_0`` the count, otherwise the sum of
    p-th powers. Strict whenever a strict move attains the value.
    """
    moves = [m for nd in need_list for m in nd.values()]
    if p == 0:
        return Fraction(len(moves)), False
    if p == INF:
        if not moves:
            return Fraction(0), False
        top = max(a for a, _ in moves)
        return top, any(s for a, s in moves if a == top)
    return sum((a ** p for a, _ in moves), Fraction(0)), any(s for _, s in moves)


def fits(c, p, k) -> bool:
    value, strict = c
    cap = Fraction(k) if p in (0, INF) else Fraction(k) ** p
    return value < cap if strict else value <= cap


def label(total, link, tau):
    return 1 if link(total) >= tau else -1


def predict_leaf(node, x):
    i = 0
    for lo, hi, s in leaves(node):
        if all(Fraction(float(x[f])) > v for f, v in lo.items()) and \
                all(Fraction(float(x[f])) <= v for f, v in hi.items()):
            return i, s
        i += 1
    raise AssertionError("leaf boxes do not cover x")


def reachable(node, x, p, k):
    """Leaf indices of ``node`` reachable from ``x`` within budget."""
    return [i for i, (lo, hi, _) in enumerate(leaves(node))
            if not empty(lo, hi) and fits(cost([needs(x, lo, hi)], p), p, k)]


def gamma(roots, x, y, p, k):
    """Optimum of the per-tree attack problem by exhaustive search."""
    options = []
    for root in roots:
        _, s_o = predict_leaf(root, x)
        opts = []
        for lo, hi, s in leaves(root):
            if empty(lo, hi):
                continue
            nd = needs(x, lo, hi)
            if fits(cost([nd], p), p, k):
                opts.append((s - s_o if y == -1 else s_o - s, nd))
        options.append(opts)
    best = 0.0
    for combo in product(*options):
        if fits(cost([nd for _, nd in combo], p), p, k):
            best = max(best, sum(g for g, _ in combo))
    return best


def robust(ens, x, y, p, k, max_tuples=200_000):
    """Exact robustness by intersecting one leaf box per tree.

    Leaves that are out of reach on their own are dropped first; they cannot
    appear in a reachable tuple.
    """
    if label(ens.raw_predict(x), ens.link, ens.tau) != y:
        return False
    per_tree = []
    for t in ens.trees:
        keep = [(lo, hi, s) for lo, hi, s in leaves(t.root)
                if not empty(lo, hi) and fits(cost([needs(x, lo, hi)], p), p, k)]
        per_tree.append(keep)
    n = math.prod(len(c) for c in per_tree)
    if n > max_tuples:
        raise RuntimeError(f"reference would enumerate {n} tuples")
    for combo in product(*per_tree):
        box = ({}, {})
        for lo, hi, _ in combo:
            box = intersect(box, (lo, hi))
        if empty(*box):
            continue
        if not fits(cost([needs(x, *box)], p), p, k):
            continue
        total = ens.base_score
        for _, _, s in combo:
            total += s
        if label(total, ens.link, ens.tau) != y:
            return False
    return True


def spread(roots, p):
    """Quadratic minimum cross-tree gap on a shared feature."""
    def thresholds(node, acc):
        if isinstance(node, Split):
            acc.append((node.feature, node.threshold))
            thresholds(node.left, acc)
            thresholds(node.right, acc)
        return acc

    per = [thresholds(r, []) for r in roots]
    best = INF
    for i in range(len(per)):
        for j in range(i + 1, len(per)):
            for f, v in per[i]:
                for g, w in per[j]:
                    if f == g:
                        best = min(best, 1.0 if p == 0 else abs(v - w))
    return best


def subset_sum(values, target) -> bool:
    """Reachable-sums set; independent of the package's combinatorial search."""
    sums = {0}
    for v in values:
        sums |= {s + v for s in sums}
    return target in sums and target > 0
