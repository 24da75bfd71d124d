"""Hard example mining: leaf-rule quality scores, the easiness threshold and
the easy/hard partition of a dataset under a forest.

A leaf is a rule "path conditions => majority class". Its candidate set is
every row of the current training set routed to it. A row is *easy* when, in
every tree, the leaf it lands in scores strictly above the threshold
``sigma`` (the mean score over all leaves of all trees).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .data import Dataset
from .forest import Forest

__all__ = [
    "METRICS",
    "LeafStats",
    "LeafScoreTable",
    "score_leaf",
    "metric_floor",
    "leaf_stats",
    "build_score_table",
    "easy_mask",
    "partition_easy_hard",
]

METRICS = {
    "supp": _kernels.METRIC_SUPP,
    "conf": _kernels.METRIC_CONF,
    "f1": _kernels.METRIC_F1,
    "gini": _kernels.METRIC_GINI,
    "entropy": _kernels.METRIC_ENTROPY,
}


@dataclass(frozen=True)
class LeafStats:
    tree_index: int
    leaf_id: int
    candidate_count: int
    majority_count: int
    class_counts: tuple[int, ...]
    total_rows: int

    def __post_init__(self):
        if not 0 <= self.majority_count <= self.candidate_count <= self.total_rows:
            raise ValueError("need 0 <= majority_count <= candidate_count <= total_rows")
        if sum(self.class_counts) != self.candidate_count:
            raise ValueError("class_counts must sum to candidate_count")


def metric_floor(metric: str, n_classes: int) -> float:
    """Smallest value ``metric`` can take; assigned to leaves no row reaches."""
    if metric == "gini":
        return 1.0 / n_classes - 1.0
    if metric == "entropy":
        return -math.log(n_classes)
    if metric in METRICS:
        return 0.0
    raise ValueError(f"unknown metric {metric!r}")


def score_leaf(stats: LeafStats, metric: str = "f1") -> float:
    """Quality of one leaf rule.

    ``supp`` is the share of the training set reaching the leaf, ``conf`` the
    share of those rows carrying the leaf's predicted class, ``f1`` their
    harmonic mean; ``gini`` and ``entropy`` are the negated impurities of the
    candidate rows (0 for a pure leaf, negative otherwise).
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if stats.candidate_count < 1:
        raise ValueError("leaf has no candidate rows")
    if stats.total_rows < 1:
        raise ValueError("total_rows must be >= 1")
    size = stats.candidate_count
    if metric in ("supp", "conf", "f1"):
        supp = size / stats.total_rows
        conf = stats.majority_count / size
        if metric == "supp":
            return supp
        if metric == "conf":
            return conf
        return 2.0 * supp * conf / (supp + conf) if supp + conf > 0 else 0.0
    p = np.asarray(stats.class_counts, dtype=np.float64) / size
    if metric == "gini":
        return float(np.sum(p * p) - 1.0)
    p = p[p > 0]
    return float(np.sum(p * np.log(p)))


def _mean_within_range(scores: np.ndarray) -> float:
    if scores.size == 0:
        raise ValueError("no scores")
    # fsum is exact before the division; clamping keeps an all-equal table at its value
    mean = math.fsum(scores.tolist()) / scores.size
    return float(min(max(mean, scores.min()), scores.max()))


@dataclass(eq=False)
class LeafScoreTable:
    """Per-leaf scores for one forest plus the easiness threshold.

    ``scores[leaf_offsets[t] + leaf_id]`` is the score of leaf ``leaf_id`` of
    tree ``t``.
    """

    metric: str
    scores: np.ndarray
    leaf_offsets: np.ndarray
    sigma: float

    def __post_init__(self):
        self.scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        self.leaf_offsets = np.ascontiguousarray(self.leaf_offsets, dtype=np.int64)
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.leaf_offsets[0] != 0 or self.leaf_offsets[-1] != self.scores.size:
            raise ValueError("leaf offsets do not cover the score vector")

    @classmethod
    def from_scores(cls, metric: str, scores, leaf_offsets) -> "LeafScoreTable":
        scores = np.asarray(scores, dtype=np.float64)
        return cls(metric, scores, leaf_offsets, _mean_within_range(scores))

    @property
    def n_trees(self) -> int:
        return self.leaf_offsets.shape[0] - 1

    def __len__(self) -> int:
        return self.scores.size

    def score(self, tree_index: int, leaf_id: int) -> float:
        lo, hi = self.leaf_offsets[tree_index], self.leaf_offsets[tree_index + 1]
        if not 0 <= leaf_id < hi - lo:
            raise KeyError((tree_index, leaf_id))
        return float(self.scores[lo + leaf_id])

    def tree_scores(self, tree_index: int) -> np.ndarray:
        return self.scores[self.leaf_offsets[tree_index]:self.leaf_offsets[tree_index + 1]]

    def items(self) -> Iterator[tuple[tuple[int, int], float]]:
        for t in range(self.n_trees):
            for leaf, s in enumerate(self.tree_scores(t)):
                yield (t, leaf), float(s)

    def subset(self, keep, recompute_sigma: bool = True) -> "LeafScoreTable":
        """Table restricted to trees ``keep`` (renumbered 0..len(keep)-1)."""
        parts = [self.tree_scores(int(t)) for t in keep]
        offsets = np.concatenate([[0], np.cumsum([p.size for p in parts])]).astype(np.int64)
        scores = np.concatenate(parts) if parts else np.zeros(0)
        sigma = _mean_within_range(scores) if recompute_sigma else self.sigma
        return LeafScoreTable(self.metric, scores, offsets, sigma)

    def check_matches(self, f: Forest) -> None:
        if self.n_trees != f.n_trees:
            raise ValueError(f"score table has {self.n_trees} trees, forest has {f.n_trees}")
        for t, tree in enumerate(f.trees):
            have = self.leaf_offsets[t + 1] - self.leaf_offsets[t]
            if have != tree.n_leaves:
                raise ValueError(
                    f"tree {t}: score table has {have} leaves, tree has {tree.n_leaves}")


def leaf_stats(f: Forest, d: Dataset, leaves: Optional[np.ndarray] = None) -> Iterator[LeafStats]:
    """Candidate-set statistics for every leaf that at least one row reaches."""
    if leaves is None:
        leaves = f.apply(d.features)
    for t, tree in enumerate(f.trees):
        counts = np.zeros((tree.n_leaves, f.n_classes), dtype=np.int64)
        np.add.at(counts, (leaves[:, t], d.labels), 1)
        for leaf in np.flatnonzero(counts.sum(axis=1)):
            cc = counts[leaf]
            yield LeafStats(t, int(leaf), int(cc.sum()), int(cc[tree.leaf_pred[leaf]]),
                            tuple(int(c) for c in cc), len(d))


def build_score_table(f: Forest, d: Dataset, metric: str = "f1",
                      leaves: Optional[np.ndarray] = None) -> LeafScoreTable:
    """Score every leaf of ``f`` on the rows of ``d`` and set sigma to the mean score.

    ``leaves`` may carry a precomputed :func:`~dbrf.forest.route_all` matrix.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if len(d) == 0:
        raise ValueError("cannot score leaves on an empty dataset")
    if leaves is None:
        leaves = f.apply(d.features)
    p = f.packed()
    scores = _kernels.leaf_scores(leaves, d.labels, p["leaf_pred"], p["leaf_off"],
                                  f.n_classes, METRICS[metric], len(d))
    return LeafScoreTable.from_scores(metric, scores, p["leaf_off"])


def easy_mask(f: Forest, table: LeafScoreTable, X=None,
              leaves: Optional[np.ndarray] = None) -> np.ndarray:
    """Boolean mask: row lands above sigma in every tree."""
    table.check_matches(f)
    if leaves is None:
        leaves = f.apply(X)
    return _kernels.easy_mask(leaves, table.scores, table.leaf_offsets, table.sigma)


def partition_easy_hard(f: Forest, table: LeafScoreTable, d: Dataset,
                        leaves: Optional[np.ndarray] = None) -> tuple[Dataset, Dataset]:
    """Split ``d`` into (easy, hard) rows, each side keeping input order."""
    mask = easy_mask(f, table, d.features, leaves)
    return d.take(np.flatnonzero(mask)), d.take(np.flatnonzero(~mask))
