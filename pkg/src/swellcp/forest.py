"""Bagged random forest of CART regression trees.

The ensemble point estimate is the arithmetic mean of the per-tree
predictions, and its spread is their population standard deviation
(divisor N). Each tree draws its bootstrap rows and its per-node candidate
columns from its own random substream keyed by ``(seed, tree index)``, so a
forest is reproducible bit for bit whatever the number of worker threads.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from . import _cart
from ._random import substream
from .errors import ConfigError

N_ENCODED_FEATURES = 22


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 300
    max_features: int = math.ceil(N_ENCODED_FEATURES / 3)
    min_samples_leaf: int = 1
    max_depth: int | None = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be at least 1")
        if self.max_features < 1:
            raise ConfigError("max_features must be at least 1")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be at least 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be non-negative or None")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Tree:
    """One fitted tree as preorder node arrays (leaves have ``feature == -1``)."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    def is_leaf(self, node):
        return self.feature[node] == _cart.LEAF

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        offsets = np.array([0, self.n_nodes], dtype=np.int64)
        return _cart.predict_trees(
            self.feature, self.threshold, self.left, self.right, self.value, offsets, X
        )[:, 0]

    def depth(self):
        def walk(node):
            if self.is_leaf(node):
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)


def fit_tree(X, y, hp, rng):
    """Fit one greedy CART tree.

    At every node the ``hp.max_features`` candidate columns are drawn from
    ``rng`` without replacement, and the (column, midpoint threshold) pair
    with the lowest summed child SSE wins; ties go to the lower column index,
    then to the lower threshold. A node stays a leaf when it has fewer than
    ``2 * min_samples_leaf`` rows, is pure, sits at the depth limit, or none
    of its candidate columns can be split.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n, p = X.shape
    if n < 1:
        raise ValueError("cannot fit a tree on zero rows")
    if len(y) != n:
        raise ValueError("X and y have different numbers of rows")
    max_features = min(hp.max_features, p)
    keys = rng.random((2 * n - 1, p))
    max_depth = -1 if hp.max_depth is None else hp.max_depth
    arrays = _cart.build_tree(X, y, keys, max_features, hp.min_samples_leaf, max_depth)
    return Tree(*(a.copy() for a in arrays))


def _fit_member(X, y, hp, seed, t):
    rng = substream(seed, "tree", t)
    rows = rng.integers(0, len(y), size=len(y))
    return fit_tree(X[rows], y[rows], hp, rng)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    hyperparams: Hyperparams
    seed: int
    target_space: str = "raw"
    n_features: int = N_ENCODED_FEATURES

    def __post_init__(self):
        if self.target_space not in ("raw", "log"):
            raise ValueError(f"target_space must be 'raw' or 'log', got {self.target_space!r}")
        if len(self.trees) != self.hyperparams.n_trees:
            raise ValueError("number of trees does not match hyperparams.n_trees")

    @cached_property
    def _packed(self):
        sizes = [t.n_nodes for t in self.trees]
        offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(sizes)
        cat = lambda name: np.ascontiguousarray(np.concatenate([getattr(t, name) for t in self.trees]))
        return (cat("feature"), cat("threshold"), cat("left"), cat("right"), cat("value"), offsets)

    def tree_predictions(self, X):
        """Matrix of per-tree predictions, one column per tree."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got {X.shape[1]}")
        return _cart.predict_trees(*self._packed, np.ascontiguousarray(X))


def fit_forest(X, y, hp=Hyperparams(), seed=0, target_space="raw", n_jobs=1):
    """Fit ``hp.n_trees`` trees, each on a size-n bootstrap resample.

    ``n_jobs`` only changes wall-clock time; ``None`` or ``-1`` uses every core.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValueError("X must be 2-D with one row per target")
    if len(y) < 1:
        raise ValueError("cannot fit a forest on zero rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if n_jobs is None or n_jobs < 1:
        n_jobs = os.cpu_count() or 1
    ids = range(hp.n_trees)
    if n_jobs == 1:
        trees = [_fit_member(X, y, hp, seed, t) for t in ids]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda t: _fit_member(X, y, hp, seed, t), ids))
    return ForestModel(tuple(trees), hp, int(seed), target_space, n_features=X.shape[1])


def ensemble_mean(per_tree):
    """Average of per-tree predictions along the last axis."""
    per_tree = np.asarray(per_tree, dtype=float)
    return per_tree.sum(axis=-1) / per_tree.shape[-1]


def ensemble_std(per_tree):
    """Population standard deviation (divisor N) across trees."""
    per_tree = np.asarray(per_tree, dtype=float)
    dev = per_tree - ensemble_mean(per_tree)[..., None]
    return np.sqrt((dev * dev).sum(axis=-1) / per_tree.shape[-1])


def predict_mean(model, X):
    """Forest point estimate for each row of ``X`` (a single row gives a scalar)."""
    X = np.asarray(X, dtype=float)
    out = ensemble_mean(model.tree_predictions(X))
    return float(out[0]) if X.ndim == 1 else out


def predict_std(model, X):
    X = np.asarray(X, dtype=float)
    out = ensemble_std(model.tree_predictions(X))
    return float(out[0]) if X.ndim == 1 else out


def predict_mean_std(model, X):
    per_tree = model.tree_predictions(X)
    return ensemble_mean(per_tree), ensemble_std(per_tree)


def heuristic_interval(mean, std, k):
    """Uncalibrated band ``mean +/- k * std``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    mean = np.asarray(mean, dtype=float)
    half = k * np.asarray(std, dtype=float)
    return mean - half, mean + half


def forest_heuristic_interval(model, X, k):
    mean, std = predict_mean_std(model, X)
    return heuristic_interval(mean, std, k)
