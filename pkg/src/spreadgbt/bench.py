"""Timing EV against the exhaustive oracle on generated large-spread models."""

from __future__ import annotations

import gc
import time
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .model import Attacker, Ensemble
from .oracle import DEFAULT_MAX_TUPLES, oracle_verify
from .synth import random_ensemble, random_instance
from .verifier import Verifier


@dataclass
class BenchRow:
    n_trees: int
    n_nodes: int
    t_ev: float
    t_oracle: float | None
    capped: bool = False

    @property
    def speedup(self) -> float | None:
        if self.t_oracle is None or self.t_ev <= 0:
            return None
        return self.t_oracle / self.t_ev

    def to_record(self) -> dict:
        return {
            "kind": "bench",
            "m": self.n_trees,
            "N": self.n_nodes,
            "t_ev_s": self.t_ev,
            "t_oracle_s": self.t_oracle,
            "speedup": self.speedup,
            "capped": self.capped,
        }


def bench_model(ens: Ensemble, X, y, attacker: Attacker, run_oracle: bool = True,
                max_tuples: int = DEFAULT_MAX_TUPLES) -> BenchRow:
    """Total wall time of EV and of the oracle over the same instances."""
    ver = Verifier(ens, attacker)
    if len(X):
        ver.ev(X[0], int(y[0]))  # warm-up, untimed
    # collector pauses are not EV work; timeit disables it the same way
    gc_was_on = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        for xi, yi in zip(X, y):
            ver.ev(xi, int(yi))
        t_ev = time.perf_counter() - t0
    finally:
        if gc_was_on:
            gc.enable()
    t_or, capped = None, False
    if run_oracle:
        t0 = time.perf_counter()
        try:
            for xi, yi in zip(X, y):
                oracle_verify(ens, xi, int(yi), attacker, max_tuples=max_tuples)
            t_or = time.perf_counter() - t0
        except ResourceLimitError:
            capped = True
    return BenchRow(ens.n_trees, ens.n_nodes, t_ev, t_or, capped)


def scaling_models(tree_counts, depth: int, attacker: Attacker, n_features: int | None = None,
                   n_instances: int = 100, seed: int = 0, value_range: float = 8.0):
    """Yield ``(ensemble, X, y)`` per tree count; labels are the model's own predictions."""
    for m in tree_counts:
        rng = np.random.default_rng([seed, m])
        d = n_features or 2 * m
        ens = random_ensemble(rng, m, depth, d, attacker, value_range=value_range, leaf_prob=0.0)
        X = np.array([random_instance(rng, d, value_range) for _ in range(n_instances)])
        y = np.array([ens.classify(row) for row in X])
        yield ens, X, y


def run_bench(tree_counts, depth: int, attacker: Attacker, n_instances: int = 100,
              seed: int = 0, run_oracle: bool = True, n_features: int | None = None,
              max_tuples: int = DEFAULT_MAX_TUPLES, value_range: float = 8.0) -> list[BenchRow]:
    return [bench_model(ens, X, y, attacker, run_oracle, max_tuples)
            for ens, X, y in scaling_models(tree_counts, depth, attacker, n_features,
                                            n_instances, seed, value_range)]
