"""Seeded generators for random ensembles, instances and toy datasets."""

from __future__ import annotations

import math

import numpy as np

from .data import LabeledDataset
from .model import Attacker, Ensemble, InverseLink, Leaf, Split


def random_ensemble(rng: np.random.Generator, n_trees: int, max_depth: int, n_features: int,
                    attacker: Attacker | None = None, value_range: float = 8.0,
                    grid: float | None = None, leaf_prob: float = 0.2,
                    tau: float = 0.0, max_tries: int = 50) -> Ensemble:
    """Random ensemble, large-spread for ``attacker`` when one is given.

    Thresholds are drawn from ``[0, value_range]`` (on multiples of ``grid``
    when set) and rejected if they come within ``2k`` of a threshold that
    another tree placed on the same feature. For ``p = 0`` features are dealt
    out to trees so that no two trees share one.
    """
    used: dict = {}
    gap = None if attacker is None or attacker.p == 0 else 2 * attacker.k
    if attacker is not None and attacker.p == 0:
        perm = rng.permutation(n_features)
        cuts = np.sort(rng.choice(np.arange(1, n_features), size=min(n_trees - 1, n_features - 1),
                                  replace=False)) if n_features > 1 else np.array([], dtype=int)
        groups = [g.tolist() for g in np.split(perm, cuts)]
        groups += [[] for _ in range(n_trees - len(groups))]
        order = rng.permutation(n_trees)
        allowed = [groups[order[i]] for i in range(n_trees)]
    else:
        allowed = [list(range(n_features))] * n_trees

    def draw_threshold(tree):
        for _ in range(max_tries):
            f = int(rng.choice(allowed[tree]))
            if grid:
                v = float(rng.integers(1, int(round(value_range / grid)))) * grid
            else:
                v = float(rng.uniform(0.0, value_range))
            if gap is not None and any(abs(v - u) <= gap
                                       for u, owner in used.get(f, ()) if owner != tree):
                continue
            used.setdefault(f, []).append((v, tree))
            return f, v
        return None

    def node(tree, depth):
        if depth == max_depth or not allowed[tree] or (depth > 0 and rng.random() < leaf_prob):
            return Leaf(float(np.round(rng.normal(), 6)))
        fv = draw_threshold(tree)
        if fv is None:
            return Leaf(float(np.round(rng.normal(), 6)))
        return Split(fv[0], fv[1], node(tree, depth + 1), node(tree, depth + 1))

    trees = [node(i, 0) for i in range(n_trees)]
    return Ensemble(trees, n_features, InverseLink.IDENTITY, tau)


def random_instance(rng: np.random.Generator, n_features: int, value_range: float = 8.0,
                    grid: float | None = None) -> np.ndarray:
    if grid:
        return rng.integers(0, int(round(value_range / grid)) + 1, size=n_features) * grid
    return rng.uniform(0.0, value_range, size=n_features)


def two_gaussians(n: int = 5000, n_features: int = 2, separation: float = 2.0,
                  seed: int = 0) -> LabeledDataset:
    """Balanced two-class Gaussian blobs whose means differ by ``separation`` overall."""
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    rng.shuffle(y)
    shift = separation / (2.0 * math.sqrt(n_features))
    X = rng.normal(size=(n, n_features)) + shift * y[:, None]
    return LabeledDataset(X, y)
