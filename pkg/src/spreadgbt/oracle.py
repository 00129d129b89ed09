"""Exhaustive ground truth and subset-sum hard instances.

:func:`oracle_verify` makes no large-spread assumption: it walks every tuple
of leaves (one per tree) whose boxes intersect, computes the minimal
perturbation into the intersection and checks whether it fits the budget
and flips the prediction. Partial tuples are abandoned once their
intersection is empty or out of budget; both properties only get worse as
more boxes are intersected, so nothing reachable is skipped.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InputError, OracleTimeout, ResourceLimitError
from .geometry import (HyperRectangle, coordinate_delta, leaf_boxes, leaf_distance,
                       within_budget)
from .model import Attacker, Ensemble, InverseLink, Leaf, Split

DEFAULT_MAX_TUPLES = 10 ** 6
DEFAULT_MAX_SSP = 20
DEFAULT_MAX_GADGET_FEATURES = 10_000


@dataclass
class OracleResult:
    robust: bool
    witness: np.ndarray | None
    tuples: int


def _box_delta(x, lo, hi):
    return [coordinate_delta(xi, l, h) for xi, l, h in zip(x, lo, hi)]


def oracle_verify(ens: Ensemble, x, y: int, attacker: Attacker,
                  max_tuples: int = DEFAULT_MAX_TUPLES,
                  timeout_ms: float | None = None) -> OracleResult:
    """Exact robustness of ``ens`` on ``(x, y)`` by leaf-tuple enumeration.

    Raises :class:`ResourceLimitError` when the product of per-tree
    reachable-leaf counts exceeds ``max_tuples`` and :class:`OracleTimeout`
    when ``timeout_ms`` elapses.
    """
    x = [float(v) for v in x]
    d = ens.n_features
    if len(x) != d:
        raise InputError(f"instance has {len(x)} features, model expects {d}")
    deadline = None if timeout_ms is None else time.perf_counter() + timeout_ms / 1e3

    # leaves individually out of reach can never be part of a reachable tuple
    per_tree = []
    bound = 1
    for t in ens.trees:
        cands = []
        for leaf, box in enumerate(leaf_boxes(t, d)):
            if box.is_empty():
                continue
            if within_budget(leaf_distance(x, box), attacker):
                cands.append((t.leaf_score(leaf), box.lo, box.hi))
        per_tree.append(cands)
        bound *= len(cands)
    if bound > max_tuples:
        raise ResourceLimitError(
            f"oracle would enumerate up to {bound} leaf tuples (> {max_tuples})")

    m = len(per_tree)
    link, tau = ens.link, ens.tau
    visited = 0
    witness = None

    def search(i, lo, hi, total):
        nonlocal visited, witness
        if i == m:
            visited += 1
            if (1 if link(total) >= tau else -1) != y:
                witness = np.array(_box_delta(x, lo, hi))
                return True
            return False
        if deadline is not None and time.perf_counter() > deadline:
            raise OracleTimeout("oracle deadline exceeded")
        for score, blo, bhi in per_tree[i]:
            nlo = [a if a >= b else b for a, b in zip(lo, blo)]
            nhi = [a if a <= b else b for a, b in zip(hi, bhi)]
            if any(a >= b for a, b in zip(nlo, nhi)):
                continue
            if not within_budget(_box_delta(x, nlo, nhi), attacker):
                continue
            if search(i + 1, nlo, nhi, total + score):
                return True
        return False

    full = HyperRectangle.full(d)
    found = search(0, list(full.lo), list(full.hi), ens.base_score)
    return OracleResult(not found, witness, visited)


# -- subset sum ------------------------------------------------------------

@dataclass(frozen=True)
class SSPInstance:
    """Does some sub-multiset of ``values`` sum exactly to ``target``?"""

    values: tuple
    target: int

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(v < 1 for v in vals):
            raise InputError("subset-sum values must be positive integers")
        if int(self.target) < 1:
            raise InputError("subset-sum target must be a positive integer")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "target", int(self.target))

    @property
    def zeta(self) -> float:
        return 1.0 / (len(self.values) + 1)


def ssp_solve_bruteforce(inst: SSPInstance, max_size: int = DEFAULT_MAX_SSP) -> bool:
    vals = inst.values
    if len(vals) > max_size:
        raise ResourceLimitError(f"brute force limited to {max_size} values, got {len(vals)}")
    for r in range(1, len(vals) + 1):
        for combo in combinations(vals, r):
            if sum(combo) == inst.target:
                return True
    return False


def ssp_gadget(inst: SSPInstance, p: int = 1, ell: int = 3):
    """Large-spread ensemble that is robust on its instance iff ``inst`` has no solution.

    Tree ``i`` is a stump on its own feature sending ``x_i > v_i`` to a leaf
    worth ``s_i``. With ``x = (zeta, ..., zeta)``, label -1, identity link,
    ``tau = G`` and budget ``G**(1/p)``, attacking tree ``i`` costs
    ``(v_i - zeta)^p = s_i - zeta`` in ``||.||_p^p`` units, so an attack
    exists iff some subset sums to exactly ``G`` (the ``zeta`` slack stays
    below 1 in total). For ``p = 1`` this is ``v_i = s_i``.

    Returns ``(ensemble, x, attacker, y)``.
    """
    if p == 0:
        return ssp_gadget_l0(inst)
    if not (p >= 1 and p != math.inf and int(p) == p):
        raise InputError("the stump gadget needs a finite integer p >= 1")
    z = inst.zeta
    trees = []
    for i, s in enumerate(inst.values):
        v = float(s) if p == 1 else z + (s - z) ** (1.0 / p)
        trees.append(Split(i, v, Leaf(0.0), Leaf(float(s))))
    G = inst.target
    k = float(G) if p == 1 else G ** (1.0 / p)
    ens = Ensemble(trees, len(trees), InverseLink.IDENTITY, float(G))
    return ens, np.full(len(trees), z), Attacker(p, k, ell), -1


def ssp_gadget_l0(inst: SSPInstance, max_features: int = DEFAULT_MAX_GADGET_FEATURES):
    """L0 variant: tree ``i`` is a right chain over ``s_i`` fresh features.

    Only the end of the chain pays ``s_i`` and reaching it requires moving all
    ``s_i`` features past 1. Returns ``(ensemble, x, attacker, y)``.
    """
    n = sum(inst.values)
    if n > max_features:
        raise ResourceLimitError(f"L0 gadget needs {n} features (> {max_features})")
    trees = []
    base = 0
    for s in inst.values:
        node = Leaf(float(s))
        for j in reversed(range(s)):
            node = Split(base + j, 1.0, Leaf(0.0), node)
        trees.append(node)
        base += s
    G = inst.target
    ens = Ensemble(trees, n, InverseLink.IDENTITY, float(G))
    return ens, np.full(n, inst.zeta), Attacker(0, G), -1
