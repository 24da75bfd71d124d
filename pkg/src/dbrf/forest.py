"""Bagged random forests with plurality voting and per-tree leaf routing."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .data import Dataset
from .tree import (CRITERIA, DecisionTree, RankedMatrix, TreeLimits, _as_matrix,
                   default_feature_subsample)

__all__ = [
    "Forest",
    "fit_forest",
    "predict_forest",
    "route_all",
    "derive_seed",
    "default_n_jobs",
]

THREADS_ENV = "DBRF_THREADS"


def default_n_jobs() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def derive_seed(*parts: int) -> int:
    """Deterministic 64-bit seed from a tuple of non-negative integers."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(eq=False)
class Forest:
    trees: list[DecisionTree]
    tree_seeds: list[int]
    n_classes: int
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        if len(self.tree_seeds) != len(self.trees):
            raise ValueError("one seed per tree required")
        if any(t.n_classes != self.n_classes for t in self.trees):
            raise ValueError("all trees must share n_classes")
        widths = {t.n_features for t in self.trees}
        if len(widths) != 1:
            raise ValueError("all trees must share the feature width")
        self._packed = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    @property
    def leaf_offsets(self) -> np.ndarray:
        return self.packed()["leaf_off"]

    def packed(self) -> dict:
        """All trees concatenated into flat arrays (built once, then cached)."""
        if self._packed is None:
            node_off = np.zeros(self.n_trees + 1, dtype=np.int64)
            leaf_off = np.zeros(self.n_trees + 1, dtype=np.int64)
            for i, t in enumerate(self.trees):
                node_off[i + 1] = node_off[i] + t.n_nodes
                leaf_off[i + 1] = leaf_off[i] + t.n_leaves
            cat = np.concatenate
            self._packed = dict(
                feature=cat([t.feature for t in self.trees]),
                threshold=cat([t.threshold for t in self.trees]),
                left=cat([t.left for t in self.trees]),
                right=cat([t.right for t in self.trees]),
                leaf_id=cat([t.leaf_id for t in self.trees]),
                leaf_pred=cat([t.leaf_pred for t in self.trees]),
                node_off=node_off,
                leaf_off=leaf_off,
            )
        return self._packed

    def subset(self, keep: Sequence[int]) -> "Forest":
        keep = [int(i) for i in keep]
        return Forest([self.trees[i] for i in keep], [self.tree_seeds[i] for i in keep],
                      self.n_classes, dict(self.config_echo))

    def apply(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        p = self.packed()
        out = np.empty((self.n_trees, X.shape[0]), dtype=np.int32).T   # column per tree
        args = (X, p["feature"], p["threshold"], p["left"], p["right"], p["leaf_id"],
                p["node_off"])
        n_jobs = min(default_n_jobs(), self.n_trees)
        if n_jobs == 1:
            _kernels.route_packed(*args, 0, self.n_trees, out)
        else:
            bounds = np.linspace(0, self.n_trees, n_jobs + 1).astype(int)
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                list(pool.map(lambda k: _kernels.route_packed(*args, bounds[k], bounds[k + 1], out),
                              range(n_jobs)))
        return out

    def votes(self, X=None, leaves=None) -> np.ndarray:
        """(rows, classes) vote counts; pass ``leaves`` to skip re-routing."""
        if leaves is None:
            leaves = self.apply(X)
        p = self.packed()
        return _kernels.vote_counts(leaves, p["leaf_pred"], p["leaf_off"], self.n_classes)

    def predict(self, X=None, leaves=None) -> np.ndarray:
        return np.argmax(self.votes(X, leaves), axis=1)


def fit_forest(d: Dataset, n_trees: int = 200, criterion: str = "gini",
               limits: TreeLimits = TreeLimits(), master_seed: int = 0,
               feature_subsample: Optional[int] = None, bootstrap: bool = True,
               n_jobs: Optional[int] = None) -> Forest:
    """Train ``n_trees`` CART trees, each on its own bootstrap sample of ``d``.

    Tree ``i`` draws its bootstrap rows and split RNG from a seed derived from
    ``(master_seed, i)`` alone, so the result does not depend on ``n_jobs``.
    ``bootstrap=False`` trains every tree on all rows once (used by tests).
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if len(d) == 0:
        raise ValueError("cannot fit a forest on an empty dataset")
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if feature_subsample is None:
        feature_subsample = default_feature_subsample(d.n_features)
    if not 1 <= feature_subsample <= d.n_features:
        raise ValueError("feature_subsample must lie in 1..n_features")
    ranked = RankedMatrix.from_dataset(d)
    n = len(d)
    seeds = [derive_seed(master_seed, i) for i in range(n_trees)]

    def grow(seed: int) -> DecisionTree:
        if bootstrap:
            rows = np.random.default_rng(seed).integers(0, n, size=n)
        else:
            rows = np.arange(n)
        return ranked.grow(rows, criterion, limits, feature_subsample, seed)

    n_jobs = default_n_jobs() if n_jobs is None else max(1, n_jobs)
    if n_jobs == 1 or n_trees == 1:
        trees = [grow(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(grow, seeds))
    echo = dict(criterion=criterion, max_depth=limits.max_depth,
                min_samples_leaf=limits.min_samples_leaf,
                min_samples_split=limits.min_samples_split,
                feature_subsample=feature_subsample, bootstrap=bootstrap)
    return Forest(trees, seeds, d.n_classes, echo)


def predict_forest(f: Forest, x) -> int:
    """Plurality vote of the trees for one row; ties go to the smallest class."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_forest expects a single row")
    return int(f.predict(x)[0])


def route_all(f: Forest, d) -> np.ndarray:
    """(rows, trees) matrix of leaf ids for a dataset or raw matrix."""
    X = d.features if isinstance(d, Dataset) else d
    return f.apply(X)
