"""Gradient boosting for binary classification with a large-spread guarantee.

Trees are grown leaf-wise on logistic-loss Newton statistics. After each
tree is finished its thresholds go on a per-feature black-list; later trees
may only split at thresholds more than ``2k`` away from every black-listed
threshold on the same feature (for ``p = 0``: on features no earlier tree
used). The resulting ensemble is large-spread for the configured attacker
by construction.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .model import Attacker, Ensemble, InverseLink, Leaf, Split

log = logging.getLogger(__name__)

LEAF_GRID = (16, 32, 64, 128, 256)


@dataclass
class TrainConfig:
    max_trees: int = 500
    learning_rate: float = 0.1
    max_leaves: int = 16
    min_samples_per_leaf: int = 20
    early_stopping_rounds: int = 50
    spread: Attacker | None = None
    reg_lambda: float = 1.0
    link: str = "logistic"
    seed: int = 0

    def __post_init__(self):
        if self.max_trees < 1 or self.max_leaves < 2 or self.min_samples_per_leaf < 1:
            raise InputError("max_trees, max_leaves and min_samples_per_leaf must be positive "
                             "(max_leaves >= 2)")
        if not 0 < self.learning_rate <= 1:
            raise InputError("learning_rate must lie in (0, 1]")
        if self.early_stopping_rounds < 1:
            raise InputError("early_stopping_rounds must be positive")
        if self.reg_lambda < 0:
            raise InputError("reg_lambda must be non-negative")
        InverseLink(self.link)


class Blacklist:
    """Thresholds used by finished trees, per feature."""

    def __init__(self, attacker: Attacker | None):
        self.attacker = attacker
        self.used: dict = {}

    @property
    def gap(self) -> float:
        return 2 * self.attacker.k

    def update(self, feature: int, v: float) -> "Blacklist":
        vals = self.used.setdefault(feature, [])
        i = bisect.bisect_left(vals, v)
        if i == len(vals) or vals[i] != v:
            vals.insert(i, v)
        return self

    def allowed_mask(self, feature: int, candidates: np.ndarray) -> np.ndarray:
        """Boolean mask over sorted ``candidates`` of thresholds still usable."""
        candidates = np.asarray(candidates, dtype=float)
        if self.attacker is None or feature not in self.used:
            return np.ones(len(candidates), dtype=bool)
        if self.attacker.p == 0:
            return np.zeros(len(candidates), dtype=bool)
        used = np.asarray(self.used[feature])
        # nearest used threshold on either side decides
        j = np.searchsorted(used, candidates)
        below = used[np.clip(j - 1, 0, len(used) - 1)]
        above = used[np.clip(j, 0, len(used) - 1)]
        dist = np.minimum(np.abs(candidates - below), np.abs(above - candidates))
        return dist > self.gap

    def filter(self, feature: int, candidates) -> list:
        candidates = np.asarray(candidates, dtype=float)
        return candidates[self.allowed_mask(feature, candidates)].tolist()


def candidate_thresholds(values) -> np.ndarray:
    """Midpoints between consecutive distinct values of a sorted column."""
    u = np.unique(np.asarray(values, dtype=float))
    return (u[:-1] + u[1:]) / 2.0


def filter_candidates(bl: Blacklist, feature: int, candidates) -> list:
    return bl.filter(feature, candidates)


def update_blacklist(bl: Blacklist, feature: int, v: float) -> Blacklist:
    return bl.update(feature, v)


# -- loss ------------------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_loss(y, margin):
    """Mean ``log(1 + exp(-y * margin))``."""
    return float(np.mean(np.logaddexp(0.0, -y * margin)))


def logistic_grad_hess(y, margin):
    s = _sigmoid(-y * margin)
    return -y * s, s * (1.0 - s)


# -- tree growth -----------------------------------------------------------

@dataclass
class _SplitChoice:
    gain: float
    feature: int
    threshold: float
    left: np.ndarray
    right: np.ndarray


@dataclass(eq=False)
class _Node:
    idx: np.ndarray
    split: _SplitChoice | None = None
    children: tuple | None = None


def _leaf_value(g, h, lam):
    return -g.sum() / (h.sum() + lam)


class _TreeBuilder:
    def __init__(self, X, order, blacklist, cfg):
        self.X = X
        self.order = order  # per feature, row indices sorted by that feature
        self.blacklist = blacklist
        self.cfg = cfg
        self.raw_candidates = 0
        self.allowed_candidates = 0

    def best_split(self, idx, g, h) -> _SplitChoice | None:
        cfg = self.cfg
        n = len(idx)
        minn = cfg.min_samples_per_leaf
        if n < 2 * minn:
            return None
        lam = cfg.reg_lambda
        G, H = g[idx].sum(), h[idx].sum()
        parent = G * G / (H + lam)
        member = np.zeros(len(self.X), dtype=bool)
        member[idx] = True
        best = None
        for f in range(self.X.shape[1]):
            rows = self.order[f][member[self.order[f]]]
            xs = self.X[rows, f]
            # split positions: after row i where the value changes
            pos = np.nonzero(xs[1:] != xs[:-1])[0]
            pos = pos[(pos + 1 >= minn) & (n - pos - 1 >= minn)]
            if len(pos) == 0:
                continue
            thr = (xs[pos] + xs[pos + 1]) / 2.0
            ok = self.blacklist.allowed_mask(f, thr)
            self.raw_candidates += len(thr)
            self.allowed_candidates += int(ok.sum())
            if not ok.any():
                continue
            pos, thr = pos[ok], thr[ok]
            cg = np.cumsum(g[rows])[pos]
            ch = np.cumsum(h[rows])[pos]
            gain = cg * cg / (ch + lam) + (G - cg) ** 2 / (H - ch + lam) - parent
            j = int(np.argmax(gain))
            if gain[j] > 1e-12 and (best is None or gain[j] > best.gain):
                cut = pos[j] + 1
                best = _SplitChoice(float(gain[j]), f, float(thr[j]),
                                    np.sort(rows[:cut]), np.sort(rows[cut:]))
        return best

    def grow(self, g, h) -> tuple:
        """Leaf-wise growth; returns ``(nested root, leaf values per row)``."""
        cfg = self.cfg
        root = _Node(np.arange(len(self.X)))
        root.split = self.best_split(root.idx, g, h)
        # the black-list is exhausted when it alone prevents splitting the root
        self.exhausted = self.raw_candidates > 0 and self.allowed_candidates == 0
        leaves = [root]
        while len(leaves) < cfg.max_leaves:
            cand = [nd for nd in leaves if nd.split is not None]
            if not cand:
                break
            nd = max(cand, key=lambda nd: nd.split.gain)
            leaves.remove(nd)
            a, b = _Node(nd.split.left), _Node(nd.split.right)
            nd.children = (a, b)
            for c in (a, b):
                c.split = self.best_split(c.idx, g, h)
                leaves.append(c)
        out = np.zeros(len(self.X))
        lam, lr = cfg.reg_lambda, cfg.learning_rate

        def build(nd):
            if nd.children is None:
                v = lr * _leaf_value(g[nd.idx], h[nd.idx], lam)
                out[nd.idx] = v
                return Leaf(float(v))
            s = nd.split
            return Split(s.feature, s.threshold, build(nd.children[0]), build(nd.children[1]))

        return build(root), out


def predict_nested(node, X) -> np.ndarray:
    """Scores of a nested tree for every row of ``X``."""
    out = np.empty(len(X))

    def walk(nd, idx):
        if isinstance(nd, Leaf):
            out[idx] = nd.score
            return
        go_left = X[idx, nd.feature] <= nd.threshold
        walk(nd.left, idx[go_left])
        walk(nd.right, idx[~go_left])

    walk(node, np.arange(len(X)))
    return out


def _thresholds(node, acc):
    if isinstance(node, Split):
        acc.append((node.feature, node.threshold))
        _thresholds(node.left, acc)
        _thresholds(node.right, acc)
    return acc


@dataclass
class TrainResult:
    ensemble: Ensemble
    log: list = field(default_factory=list)
    stop_reason: str = "max_trees"
    best_round: int = 0


def _check_labels(y, what):
    y = np.asarray(y)
    if not set(np.unique(y)).issubset({-1, 1}):
        raise InputError(f"{what} labels must be +1/-1")
    return y.astype(float)


def fit(X, y, X_valid=None, y_valid=None, cfg: TrainConfig | None = None) -> TrainResult:
    """Train a (large-spread, if ``cfg.spread`` is set) boosted ensemble.

    Stops at ``cfg.max_trees``, after ``cfg.early_stopping_rounds`` rounds
    without validation-accuracy improvement (only when a validation set is
    given), when no split has positive gain, or when the black-list leaves
    no usable threshold at the root. With early stopping the ensemble is
    truncated to the best validation round.
    """
    cfg = cfg or TrainConfig()
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise InputError("training set is empty")
    y = _check_labels(y, "training")
    if len(np.unique(y)) < 2:
        raise InputError("training set contains a single class")
    has_valid = X_valid is not None and len(X_valid) > 0
    if has_valid:
        X_valid = np.asarray(X_valid, dtype=float)
        y_valid = _check_labels(y_valid, "validation")

    pos = float(np.mean(y > 0))
    base = math.log(pos / (1.0 - pos))
    margin = np.full(len(X), base)
    vmargin = np.full(len(X_valid), base) if has_valid else None
    order = [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]
    blacklist = Blacklist(cfg.spread)
    trees = []
    history = []
    best_acc, best_round = -1.0, 0
    reason = "max_trees"

    for rnd in range(cfg.max_trees):
        g, h = logistic_grad_hess(y, margin)
        builder = _TreeBuilder(X, order, blacklist, cfg)
        root, update = builder.grow(g, h)
        if isinstance(root, Leaf):
            reason = "blacklist_exhausted" if builder.exhausted else "no_split"
            break
        trees.append(root)
        margin = margin + update
        for f, v in _thresholds(root, []):
            blacklist.update(f, v)
        entry = {"round": rnd + 1, "train_loss": logistic_loss(y, margin)}
        if has_valid:
            vmargin = vmargin + predict_nested(root, X_valid)
            acc = float(np.mean(np.where(vmargin >= 0, 1.0, -1.0) == y_valid))
            entry["valid_accuracy"] = acc
            if acc > best_acc:
                best_acc, best_round = acc, rnd + 1
            elif rnd + 1 - best_round >= cfg.early_stopping_rounds:
                reason = "early_stopping"
                history.append(entry)
                break
        history.append(entry)
        log.debug("round %d: %s", rnd + 1, entry)

    if not trees:
        raise InputError(f"no tree could be grown ({reason})")
    if has_valid and reason == "early_stopping":
        trees = trees[:best_round]
    else:
        best_round = len(trees)
    link = InverseLink(cfg.link)
    tau = 0.5 if link is InverseLink.LOGISTIC else 0.0
    ens = Ensemble(trees, X.shape[1], link, tau, base)
    return TrainResult(ens, history, reason, best_round)


def grid_fit(X, y, X_valid, y_valid, cfg: TrainConfig, leaf_grid=LEAF_GRID):
    """Fit once per ``max_leaves`` value; keep the best on validation accuracy."""
    best = None
    for leaves in leaf_grid:
        c = TrainConfig(**{**cfg.__dict__, "max_leaves": leaves})
        res = fit(X, y, X_valid, y_valid, c)
        acc = float(np.mean(res.ensemble.predict(X_valid) == y_valid)) if len(X_valid) else 0.0
        log.info("max_leaves=%d: validation accuracy %.4f (%d trees)",
                 leaves, acc, res.ensemble.n_trees)
        if best is None or acc > best[0]:
            best = (acc, leaves, res)
    return best
