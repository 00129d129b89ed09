import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import reference as ref
from conftest import ELL, case_stream, four_leaf_root, two_stumps
from spreadgbt.errors import InputError, ResourceLimitError
from spreadgbt.geometry import perturbation_weight
from spreadgbt.model import Attacker, Ensemble, Leaf, Split, Tree
from spreadgbt.solver import (CONSERVATIVE, EXACT, GainItem, adversarial_gain, eta,
                              knapsack_table, recover_selection, solve, solve_l0, solve_linf,
                              solve_lp)

INF = math.inf
X = [4.0, 4.0]


def test_gain_example():
    t = Tree(four_leaf_root())
    g = adversarial_gain(t, [9.1, 0.1], -1, 3)
    assert g == 0.6 - 0.2
    assert abs(g - 0.4) <= 1e-15
    assert adversarial_gain(t, [9.1, 0.1], -1, 0) == 0.0
    assert adversarial_gain(t, [9.1, 0.1], 1, 3) == -(0.6 - 0.2)


def test_linf_examples():
    ens = two_stumps()
    assert solve_linf(ens, X, -1, Attacker(INF, 2.0)).gamma == 3.0
    assert solve_linf(ens, X, -1, Attacker(INF, 0.0)).gamma == 0.0
    assert solve_linf(ens, X, -1, Attacker(INF, 0.5)).gamma == 0.0


def test_linf_fast_path_agrees_with_selection():
    for ens, x, y, a in case_stream(3, INF, 300):
        assert solve_linf(ens, x, y, a, with_selection=False).gamma == solve_linf(ens, x, y, a).gamma


def test_linf_tie_takes_lowest_leaf():
    t = Split(0, 1.0, Leaf(0.0), Split(0, 2.0, Leaf(5.0), Leaf(5.0)))
    res = solve_linf(Ensemble([t], 1), [0.0], -1, Attacker(INF, 10.0))
    assert res.selection[0].leaf == 1


def test_l0_examples():
    ens = two_stumps()
    r1 = solve_l0(ens, X, -1, Attacker(0, 1))
    assert r1.gamma == 2.0
    assert {i: it.leaf for i, it in r1.selection.items()} == {1: 1}
    r2 = solve_l0(ens, X, -1, Attacker(0, 2))
    assert r2.gamma == 3.0
    assert {i: it.leaf for i, it in r2.selection.items()} == {0: 1, 1: 1}
    r0 = solve_l0(ens, X, -1, Attacker(0, 0))
    assert r0.gamma == 0.0 and r0.selection == {}


def test_lp_example():
    res = solve_lp(two_stumps(), X, -1, Attacker(1, 1.5, 1))
    assert res.gamma == 2.0 and res.mode == EXACT
    assert list(res.selection) == [1]


def test_lp_unbounded_budget_matches_linf():
    ens = two_stumps()
    big = solve_lp(ens, X, -1, Attacker(2, 100.0, 2)).gamma
    assert big == solve_linf(ens, X, -1, Attacker(INF, 1e9)).gamma == 3.0


def test_eta():
    assert eta(0.123, 3) == 123
    assert eta(0.29, 2) == 29  # 0.29 * 100 is 28.999999999999996 in floats
    assert eta(0.1234, 3) == pytest.approx(123.4)


def test_lp_conservative_mode_over_reports():
    # each stump costs 1/3; both together (2/3) exceed k = 0.5
    ens = Ensemble([Split(0, 1.0 / 3.0, Leaf(0.0), Leaf(1.0)),
                    Split(1, 1.0 / 3.0, Leaf(0.0), Leaf(1.0))], 2)
    exact_ish = solve_lp(ens, [0.0, 0.0], -1, Attacker(1, 0.5, 6))
    assert exact_ish.mode == CONSERVATIVE and exact_ish.gamma == 1.0
    coarse = solve_lp(ens, [0.0, 0.0], -1, Attacker(1, 0.5, 0))
    assert coarse.mode == CONSERVATIVE and coarse.gamma == 2.0


def test_dp_cell_guard():
    with pytest.raises(ResourceLimitError):
        solve_lp(two_stumps(), X, -1, Attacker(2, 3.0, 8), max_cells=1000)


def test_wrong_norm_rejected():
    with pytest.raises(InputError):
        solve_l0(two_stumps(), X, -1, Attacker(1, 1.0))
    with pytest.raises(InputError):
        solve_lp(two_stumps(), X, -1, Attacker(INF, 1.0))


def test_capacity_is_capped_by_reach():
    # an enormous L0 budget must not allocate an enormous table
    res = solve_l0(two_stumps(), X, -1, Attacker(0, 10 ** 12))
    assert res.gamma == 3.0


group_items = st.lists(st.lists(st.tuples(st.floats(0.01, 5), st.integers(0, 6)),
                                max_size=4), min_size=1, max_size=5)


def _groups(raw):
    return [[GainItem(i, j, g, w, None) for j, (g, w) in enumerate(items)]
            for i, items in enumerate(raw)]


@given(group_items, st.integers(0, 12))
def test_dp_table_monotone(raw, cap):
    dp = knapsack_table(_groups(raw), cap)
    t = dp.table
    assert (t[0] == 0).all()
    assert (np.diff(t, axis=1) >= 0).all()
    assert (t[1:] >= t[:-1]).all()


@given(group_items, st.integers(0, 12))
def test_dp_matches_enumeration(raw, cap):
    groups = _groups(raw)
    dp = knapsack_table(groups, cap)
    best = 0.0
    for pick in __import__("itertools").product(*[[None] + g for g in groups]):
        chosen = [it for it in pick if it is not None]
        if sum(it.cost for it in chosen) <= cap:
            best = max(best, sum(it.gain for it in chosen))
    assert dp.gamma == pytest.approx(best, abs=1e-9)
    sel = recover_selection(dp)
    assert sum(it.cost for it in sel.values()) <= cap
    assert sum(it.gain for it in sel.values()) == pytest.approx(dp.gamma, abs=1e-9)
    assert all(i == it.tree for i, it in sel.items())


@pytest.mark.parametrize("p", [INF, 0, 1, 2])
def test_gamma_matches_reference(p):
    for ens, x, y, a in case_stream(11, p, 150, max_trees=4):
        got = solve(ens, x, y, a).gamma
        want = ref.gamma([t.root for t in ens.trees], x, y, p, a.k)
        assert got == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("p", [INF, 0, 1, 2])
def test_selection_is_valid(p):
    for ens, x, y, a in case_stream(12, p, 150):
        res = solve(ens, x, y, a)
        assert res.mode == EXACT
        assert sum(it.gain for it in res.selection.values()) == pytest.approx(res.gamma, abs=1e-9)
        delta = res.delta(ens.n_features)
        if p == INF:
            assert perturbation_weight(delta, p) <= a.k
        elif p == 0:
            assert np.count_nonzero(delta) <= a.k
        else:
            assert sum(abs(v) ** p for v in delta) <= a.k ** p + 1e-9
        for i, it in res.selection.items():
            assert it.gain > 0 and it.tree == i


@pytest.mark.parametrize("p", [INF, 0, 1, 2])
def test_gamma_invariant_under_tree_order(p):
    rng = np.random.default_rng(5)
    for ens, x, y, a in case_stream(13, p, 100):
        perm = rng.permutation(ens.n_trees)
        shuffled = Ensemble([ens.trees[i].root for i in perm], ens.n_features,
                            ens.link, ens.tau, ens.base_score)
        assert solve(shuffled, x, y, a).gamma == pytest.approx(solve(ens, x, y, a).gamma,
                                                               abs=1e-9)


@pytest.mark.parametrize("p", [1, 2])
def test_conservative_never_below_exact(p):
    for ens, x, y, a in case_stream(14, p, 150):
        exact = solve(ens, x, y, a)
        assert exact.mode == EXACT
        for ell in range(0, ELL[p]):
            low = solve(ens, x, y, Attacker(p, a.k, ell))
            assert low.gamma >= exact.gamma - 1e-9
