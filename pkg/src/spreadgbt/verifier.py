"""Robustness verification for large-spread ensembles.

``EV`` compares the raw score shifted by the optimal total gain against the
decision threshold. ``BV`` materialises the optimal perturbation and
re-classifies the perturbed instance, which also yields a witness.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NotLargeSpreadError, OracleTimeout
from .geometry import norm, spread_report
from .model import Attacker, Ensemble
from .solver import EXACT, solve

ENGINES = ("ev", "bv", "oracle")


@dataclass
class VerificationReport:
    index: int | None
    label: int
    predicted: int | None
    robust: bool | None
    gamma: float | None = None
    delta_opt: np.ndarray | None = None
    mode: str = EXACT
    elapsed_ms: float = 0.0
    engine: str = "ev"
    error: str | None = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        if self.robust is None:
            return "unknown"
        if self.predicted != self.label:
            return "misclassified"
        return "robust" if self.robust else "not_robust"

    def to_record(self) -> dict:
        return {
            "kind": "instance",
            "index": self.index,
            "label": self.label,
            "predicted": self.predicted,
            "status": self.status,
            "robust": self.robust,
            "gamma": self.gamma,
            "mode": self.mode,
            "engine": self.engine,
            "delta": None if self.delta_opt is None else [float(v) for v in self.delta_opt],
            "elapsed_ms": round(self.elapsed_ms, 4),
            "error": self.error,
        }


@dataclass
class DatasetRobustness:
    robust: int = 0
    not_robust: int = 0
    misclassified: int = 0
    unknown: int = 0
    errors: int = 0
    reports: list = field(default_factory=list, repr=False)

    @property
    def total(self) -> int:
        return self.robust + self.not_robust + self.misclassified + self.unknown

    @property
    def robustness(self) -> float:
        return self.robust / self.total if self.total else 0.0

    @property
    def accuracy(self) -> float:
        # unknown verdicts are only produced for correctly classified instances
        return (self.total - self.misclassified) / self.total if self.total else 0.0

    def to_record(self) -> dict:
        return {
            "kind": "summary",
            "total": self.total,
            "robust": self.robust,
            "not_robust": self.not_robust,
            "misclassified": self.misclassified,
            "unknown": self.unknown,
            "errors": self.errors,
            "robustness": self.robustness,
            "accuracy": self.accuracy,
        }


class Verifier:
    """Verifies instances of one model against one attacker.

    The large-spread precondition is checked once here; construction fails
    with :class:`NotLargeSpreadError` if it does not hold (unless
    ``check_spread`` is false, which is only sound with the oracle engine).
    """

    def __init__(self, ensemble: Ensemble, attacker: Attacker, check_spread: bool = True,
                 max_cells: int | None = None):
        self.ensemble = ensemble
        self.attacker = attacker
        self.spread = spread_report(ensemble, attacker)
        if check_spread and not self.spread.is_large_spread:
            raise NotLargeSpreadError(
                f"model is not large-spread for L{attacker.norm_name} budget {attacker.k}: "
                f"{self.spread.describe()}; use the oracle engine instead", self.spread)
        self._solve_kw = {} if max_cells is None else {"max_cells": max_cells}

    def _start(self, x, y):
        ens = self.ensemble
        if len(x) != ens.n_features:
            raise InputError(f"instance has {len(x)} features, model expects {ens.n_features}")
        if y not in (1, -1):
            raise InputError(f"label must be +1 or -1, got {y}")
        s = ens.raw_predict(x)
        return s, ens.label_for_score(s)

    def ev(self, x, y: int, index: int | None = None) -> VerificationReport:
        t0 = time.perf_counter()
        s, pred = self._start(x, y)
        if pred != y:
            return VerificationReport(index, y, pred, False, engine="ev",
                                      elapsed_ms=(time.perf_counter() - t0) * 1e3)
        res = solve(self.ensemble, x, y, self.attacker, with_selection=False, **self._solve_kw)
        link, tau = self.ensemble.link, self.ensemble.tau
        if y == 1:
            robust = link(s - res.gamma) >= tau
        else:
            robust = link(s + res.gamma) < tau
        return VerificationReport(index, y, pred, robust, res.gamma, None, res.mode,
                                  (time.perf_counter() - t0) * 1e3, "ev")

    def bv(self, x, y: int, index: int | None = None) -> VerificationReport:
        t0 = time.perf_counter()
        s, pred = self._start(x, y)
        x = np.asarray(x, dtype=float)
        if pred != y:
            return VerificationReport(index, y, pred, False, delta_opt=np.zeros(len(x)),
                                      engine="bv",
                                      elapsed_ms=(time.perf_counter() - t0) * 1e3)
        res = solve(self.ensemble, x, y, self.attacker, **self._solve_kw)
        delta = res.delta(len(x))
        robust = self.ensemble.classify(x + delta) == y
        return VerificationReport(index, y, pred, robust, res.gamma, delta, res.mode,
                                  (time.perf_counter() - t0) * 1e3, "bv")

    def oracle(self, x, y: int, index: int | None = None, timeout_ms: float | None = None,
               max_tuples: int | None = None) -> VerificationReport:
        from .oracle import DEFAULT_MAX_TUPLES, oracle_verify

        t0 = time.perf_counter()
        s, pred = self._start(x, y)
        try:
            res = oracle_verify(self.ensemble, x, y, self.attacker,
                                max_tuples=max_tuples or DEFAULT_MAX_TUPLES,
                                timeout_ms=timeout_ms)
        except OracleTimeout:
            return VerificationReport(index, y, pred, None, engine="oracle",
                                      elapsed_ms=(time.perf_counter() - t0) * 1e3)
        return VerificationReport(index, y, pred, res.robust, None, res.witness, EXACT,
                                  (time.perf_counter() - t0) * 1e3, "oracle")

    def verify(self, x, y: int, engine: str = "ev", index: int | None = None, **kw):
        if engine == "ev":
            return self.ev(x, y, index)
        if engine == "bv":
            return self.bv(x, y, index)
        if engine == "oracle":
            return self.oracle(x, y, index, **kw)
        raise InputError(f"unknown engine {engine!r}; choose from {ENGINES}")


def verify_ev(ensemble: Ensemble, x, y: int, attacker: Attacker) -> VerificationReport:
    return Verifier(ensemble, attacker).ev(x, y)


def verify_bv(ensemble: Ensemble, x, y: int, attacker: Attacker) -> VerificationReport:
    return Verifier(ensemble, attacker).bv(x, y)


def verify_dataset(ensemble: Ensemble, X, y, attacker: Attacker, engine: str = "ev",
                   workers: int = 1, verifier: Verifier | None = None,
                   **kw) -> DatasetRobustness:
    """Verify every row of ``X``; per-instance input errors are recorded, not raised."""
    ver = verifier or Verifier(ensemble, attacker, check_spread=(engine != "oracle"))

    def one(i):
        try:
            return ver.verify(X[i], int(y[i]), engine, index=i, **kw)
        except InputError as e:
            return VerificationReport(i, int(y[i]), None, None, engine=engine, error=str(e))

    n = len(X)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, range(n)))
    else:
        reports = [one(i) for i in range(n)]
    out = DatasetRobustness(reports=reports)
    for r in reports:
        status = r.status
        if status == "error":
            out.errors += 1
        else:
            setattr(out, status, getattr(out, status) + 1)
    return out


def delta_norm(report: VerificationReport, p) -> float | None:
    if report.delta_opt is None:
        return None
    return norm([v for v in report.delta_opt], p)
