import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spreadgbt.model import Attacker, Ensemble, InverseLink, Leaf, Split
from spreadgbt.synth import random_ensemble, random_instance

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def four_leaf_root():
    # x_0 <= 10 ? (x_1 <= 5 ? 0.2 : 0.8) : (x_1 <= 8 ? 0.3 : 0.6)
    return Split(0, 10.0, Split(1, 5.0, Leaf(0.2), Leaf(0.8)),
                 Split(1, 8.0, Leaf(0.3), Leaf(0.6)))


def two_stumps(tau=0.0):
    return Ensemble([Split(0, 5.0, Leaf(0.0), Leaf(1.0)),
                     Split(1, 5.0, Leaf(0.0), Leaf(2.0))], 2, InverseLink.IDENTITY, tau)


@pytest.fixture
def four_leaf():
    return four_leaf_root()


@pytest.fixture
def four_leaf_ensemble():
    return Ensemble([four_leaf_root()], 2)


@pytest.fixture
def stumps():
    return two_stumps


def random_case(rng, p, k, max_trees=6, max_depth=3, max_d=8, grid=None):
    """A random large-spread ensemble with one instance and a label.

    The label is the model's own prediction most of the time so that most
    cases exercise the solver rather than the misclassification shortcut.
    """
    m = int(rng.integers(1, max_trees + 1))
    depth = int(rng.integers(1, max_depth + 1))
    d = int(rng.integers(max(2, m if p == 0 else 2), max_d + 1))
    ens = random_ensemble(rng, m, depth, d, Attacker(p, k), grid=grid)
    x = random_instance(rng, d, grid=grid)
    y = ens.classify(x)
    if rng.random() < 0.15:
        y = -y
    return ens, x, y


# budgets on a grid offset so that no sum of grid-aligned costs equals them
def lp_budget(rng, p):
    if p == 1:
        return (int(rng.integers(0, 24)) + 0.5) / 8.0
    return math.sqrt((int(rng.integers(0, 64)) + 0.5) / 16.0)


GRID = {math.inf: 0.125, 0: 0.125, 1: 0.125, 2: 0.25}
ELL = {1: 4, 2: 5}


def attacker_for(rng, p):
    if p == math.inf:
        return Attacker(p, float(rng.integers(0, 17)) / 8.0)
    if p == 0:
        return Attacker(0, int(rng.integers(0, 4)))
    return Attacker(p, lp_budget(rng, p), ELL[p])


def case_stream(seed, p, n, **kw):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        a = attacker_for(rng, p)
        ens, x, y = random_case(rng, p, a.k, grid=GRID[p], **kw)
        yield ens, x, y, a


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_LINES: list = []


def report(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
