import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import reference as ref
from conftest import case_stream, two_stumps
from spreadgbt.errors import InputError, OracleTimeout, ResourceLimitError
from spreadgbt.geometry import check_large_spread, norm
from spreadgbt.model import Attacker, Ensemble
from spreadgbt.oracle import (SSPInstance, oracle_verify, ssp_gadget, ssp_gadget_l0,
                              ssp_solve_bruteforce)
from spreadgbt.synth import random_ensemble
from spreadgbt.verifier import verify_ev

INF = math.inf


def test_two_stump_witness_attacks_second_tree():
    res = oracle_verify(two_stumps(1.5), [4.0, 4.0], -1, Attacker(0, 1))
    assert not res.robust
    assert res.witness[0] == 0.0 and res.witness[1] > 0
    assert two_stumps(1.5).classify(np.array([4.0, 4.0]) + res.witness) == 1


@pytest.mark.parametrize("p", [INF, 0, 1, 2])
def test_zero_budget_is_correctness(p):
    for ens, x, y, _ in case_stream(31, p, 100):
        a = Attacker(p, 0, 4)
        assert oracle_verify(ens, x, y, a).robust == (ens.classify(x) == y)


@pytest.mark.parametrize("p", [INF, 0, 1, 2])
def test_witnesses_are_sound(p):
    for ens, x, y, a in case_stream(32, p, 200):
        res = oracle_verify(ens, x, y, a)
        if res.robust or ens.classify(x) != y:
            continue
        assert ens.classify(x + res.witness) != y
        assert norm(res.witness, p) <= a.k * (1 + 1e-12)


def test_works_without_large_spread():
    rng = np.random.default_rng(3)
    for _ in range(100):
        ens = random_ensemble(rng, 3, 2, 2, grid=0.5)  # no spread constraint
        x = rng.integers(0, 17, size=2) / 2.0
        a = Attacker(INF, float(rng.integers(0, 5)) / 2.0 + 0.25)
        y = ens.classify(x)
        assert oracle_verify(ens, x, y, a).robust == ref.robust(ens, x, y, INF, a.k)


def test_single_tree_matches_ev():
    rng = np.random.default_rng(4)
    for _ in range(100):
        ens = random_ensemble(rng, 1, 4, 3, grid=0.25)
        x = rng.integers(0, 33, size=3) / 4.0
        a = Attacker(INF, float(rng.integers(0, 9)) / 4.0)
        y = ens.classify(x)
        assert oracle_verify(ens, x, y, a).robust == verify_ev(ens, x, y, a).robust


def test_tuple_cap():
    rng = np.random.default_rng(5)
    ens = random_ensemble(rng, 8, 3, 16, value_range=8.0, leaf_prob=0.0)
    with pytest.raises(ResourceLimitError):
        oracle_verify(ens, np.full(16, 4.0), 1, Attacker(INF, 100.0), max_tuples=1000)


def test_timeout():
    rng = np.random.default_rng(6)
    ens = random_ensemble(rng, 10, 3, 20, Attacker(INF, 4.0), value_range=100.0)
    x = rng.uniform(0, 100, 20)
    with pytest.raises(OracleTimeout):
        oracle_verify(ens, x, ens.classify(x), Attacker(INF, 4.0), timeout_ms=0.0)


def test_dimension_checked():
    with pytest.raises(InputError):
        oracle_verify(two_stumps(), [1.0], 1, Attacker(INF, 1.0))


def test_subset_sum_examples():
    assert ssp_solve_bruteforce(SSPInstance((3, 5, 7), 8))
    assert not ssp_solve_bruteforce(SSPInstance((3, 5, 7), 2))
    assert not ssp_solve_bruteforce(SSPInstance((), 4))
    with pytest.raises(ResourceLimitError):
        ssp_solve_bruteforce(SSPInstance(tuple(range(1, 30)), 3))
    with pytest.raises(InputError):
        SSPInstance((0, 1), 1)
    with pytest.raises(InputError):
        SSPInstance((1,), 0)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
@pytest.mark.parametrize("values,target,robust", [
    ((3, 5, 7), 8, False), ((3, 5, 7), 2, True), ((1,), 1, False),
    ((2,), 2, False), ((2,), 1, True), ((1, 1), 2, False), ((2, 3), 5, False),
    ((4, 6), 5, True), ((5, 5), 10, False),
])
def test_gadget_examples(p, values, target, robust):
    ens, x, a, y = ssp_gadget(SSPInstance(values, target), p)
    assert check_large_spread(ens, a)
    assert verify_ev(ens, x, y, a).robust is robust
    assert oracle_verify(ens, x, y, a).robust is robust


def test_gadget_shape():
    inst = SSPInstance((3, 5, 7), 8)
    ens, x, a, y = ssp_gadget(inst, 1)
    assert y == -1 and a.k == 8 and ens.tau == 8
    assert [t.threshold[0] for t in ens.trees] == [3.0, 5.0, 7.0]
    assert np.all(x == 0.25)
    ens0, x0, a0, _ = ssp_gadget_l0(inst)
    assert ens0.n_features == 15 and a0.p == 0 and a0.k == 8
    assert [t.depth for t in ens0.trees] == [3, 5, 7]


def test_l0_gadget_feature_cap():
    with pytest.raises(ResourceLimitError):
        ssp_gadget_l0(SSPInstance((50, 60), 10), max_features=100)


def test_gadget_rejects_bad_norm():
    with pytest.raises(InputError):
        ssp_gadget(SSPInstance((1,), 1), INF)


@given(st.lists(st.integers(1, 20), min_size=1, max_size=8), st.integers(1, 60),
       st.sampled_from([0, 1, 2]))
def test_gadget_faithful(values, target, p):
    ens, x, a, y = ssp_gadget(SSPInstance(values, target), p)
    assert verify_ev(ens, x, y, a).robust is not ref.subset_sum(values, target)
