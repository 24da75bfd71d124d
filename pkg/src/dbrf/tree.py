"""CART decision trees: impurity, fitting, routing and per-tree prediction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .data import Dataset

__all__ = [
    "TreeLimits",
    "DecisionTree",
    "impurity",
    "fit_tree",
    "route",
    "predict_tree",
    "default_feature_subsample",
]

CRITERIA = {"gini": _kernels.GINI, "entropy": _kernels.ENTROPY}


def impurity(class_counts, criterion: str = "gini") -> float:
    """Gini (``1 - sum p^2``) or entropy (``-sum p ln p``) of a count vector."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if (counts < 0).any():
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("class counts are all zero")
    p = counts / total
    if criterion == "gini":
        return float(1.0 - np.sum(p * p))
    if criterion == "entropy":
        p = p[p > 0]
        return float(-np.sum(p * np.log(p))) + 0.0
    raise ValueError(f"unknown criterion {criterion!r}")


@dataclass(frozen=True)
class TreeLimits:
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    min_samples_split: int = 2

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_leaf < 1 or self.min_samples_split < 2:
            raise ValueError("min_samples_leaf >= 1 and min_samples_split >= 2 required")


def default_feature_subsample(n_features: int) -> int:
    return max(1, math.ceil(math.sqrt(n_features)))


@dataclass(eq=False)
class DecisionTree:
    """A fitted binary tree stored as flat node arrays.

    For node ``i``: ``feature[i] == -1`` marks a leaf, in which case
    ``leaf_id[i]`` indexes ``leaf_counts`` (per-class training counts of the
    leaf). Decision nodes send ``x[feature] <= threshold`` to ``left[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_id: np.ndarray
    leaf_counts: np.ndarray
    n_classes: int
    n_features: int

    def __post_init__(self):
        self.feature = np.ascontiguousarray(self.feature, dtype=np.int32)
        self.threshold = np.ascontiguousarray(self.threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(self.left, dtype=np.int32)
        self.right = np.ascontiguousarray(self.right, dtype=np.int32)
        self.leaf_id = np.ascontiguousarray(self.leaf_id, dtype=np.int32)
        self.leaf_counts = np.ascontiguousarray(self.leaf_counts, dtype=np.int64)
        self.leaf_pred = np.argmax(self.leaf_counts, axis=1).astype(np.int64)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return self.leaf_counts.shape[0]

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def validate(self) -> None:
        """Re-check structural invariants; raises ``ValueError`` on violation."""
        n = self.n_nodes
        arrays = (self.threshold, self.left, self.right, self.leaf_id)
        if n == 0 or any(a.shape != (n,) for a in arrays):
            raise ValueError("node arrays have inconsistent lengths")
        if (self.feature >= self.n_features).any():
            raise ValueError("split feature out of range")
        if self.leaf_counts.ndim != 2 or self.leaf_counts.shape[1] != self.n_classes:
            raise ValueError("leaf_counts has the wrong shape")
        is_leaf = self.feature < 0
        seen = np.sort(self.leaf_id[is_leaf])
        if not np.array_equal(seen, np.arange(self.n_leaves)):
            raise ValueError("leaf ids are not exactly 0..n_leaves-1")
        if (self.leaf_id[~is_leaf] != -1).any():
            raise ValueError("decision node carries a leaf id")
        idx = np.flatnonzero(~is_leaf)
        for child in (self.left[idx], self.right[idx]):
            if (child <= idx).any() or (child >= n).any():
                raise ValueError("child index must be larger than its parent and in range")
        if (self.leaf_counts < 0).any() or (self.leaf_counts.sum(axis=1) < 1).any():
            raise ValueError("every leaf needs at least one training sample")

    def apply(self, X) -> np.ndarray:
        """Leaf id for each row of ``X``."""
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError("row width does not match the tree")
        out = np.empty((X.shape[0], 1), dtype=np.int32)
        _kernels.route_rows(X, self.feature, self.threshold, self.left, self.right,
                            self.leaf_id, out, 0)
        return out[:, 0]

    def predict(self, X) -> np.ndarray:
        return self.leaf_pred[self.apply(X)]


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return np.ascontiguousarray(X)


@dataclass(frozen=True)
class RankedMatrix:
    """Per-feature dense ranks of a training matrix, as the split kernel wants them."""

    ranks: np.ndarray     # (n_features, n_rows) int32
    values: np.ndarray    # concatenated sorted distinct values
    offsets: np.ndarray   # (n_features + 1,)
    labels: np.ndarray    # int64 class per row
    n_classes: int

    @classmethod
    def from_dataset(cls, d: Dataset) -> "RankedMatrix":
        n, F = d.features.shape
        ranks = np.empty((F, n), dtype=np.int32)
        values = []
        offsets = np.zeros(F + 1, dtype=np.int64)
        for f in range(F):
            uniq, inv = np.unique(d.features[:, f], return_inverse=True)
            ranks[f] = inv
            values.append(uniq)
            offsets[f + 1] = offsets[f] + uniq.size
        vals = np.concatenate(values) if values else np.zeros(0)
        return cls(ranks, vals, offsets, np.ascontiguousarray(d.labels), d.n_classes)

    def grow(self, samples, criterion, limits, feature_subsample, seed) -> DecisionTree:
        nodes = _kernels.build_tree(
            self.ranks, self.values, self.offsets, self.labels,
            np.sort(np.asarray(samples, dtype=np.int64)), self.n_classes,
            CRITERIA[criterion],
            -1 if limits.max_depth is None else limits.max_depth,
            limits.min_samples_leaf, limits.min_samples_split,
            feature_subsample, np.uint64(seed),
        )
        return DecisionTree(*nodes, n_classes=self.n_classes, n_features=self.ranks.shape[0])


def fit_tree(d: Dataset, row_idx, criterion: str = "gini", limits: TreeLimits = TreeLimits(),
             feature_subsample: Optional[int] = None, rng_seed: int = 0) -> DecisionTree:
    """Grow a CART tree on rows ``row_idx`` of ``d`` (repeats act as weights).

    At every node ``feature_subsample`` non-constant features are examined in
    an order drawn from a node-local RNG; each candidate threshold is the
    midpoint between consecutive distinct values present in the node, and the
    split with the largest impurity decrease wins. Nodes that are pure, hit a
    limit, or admit no impurity-reducing split become leaves.
    """
    row_idx = np.asarray(row_idx, dtype=np.int64)
    if row_idx.size == 0:
        raise ValueError("row_idx is empty")
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if feature_subsample is None:
        feature_subsample = default_feature_subsample(d.n_features)
    if not 1 <= feature_subsample <= d.n_features:
        raise ValueError("feature_subsample must lie in 1..n_features")
    return RankedMatrix.from_dataset(d).grow(row_idx, criterion, limits,
                                             feature_subsample, rng_seed)


def route(t: DecisionTree, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != t.n_features:
        raise ValueError("row width does not match the tree")
    node = 0
    while t.feature[node] >= 0:
        node = t.left[node] if x[t.feature[node]] <= t.threshold[node] else t.right[node]
    return int(t.leaf_id[node])


def predict_tree(t: DecisionTree, x) -> int:
    """Majority class of the routed leaf; ties go to the smallest class index."""
    return int(t.leaf_pred[route(t, x)])
