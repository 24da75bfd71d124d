"""Accuracy, binary ROC-AUC and confusion counts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

__all__ = ["EvalResult", "accuracy", "auc_roc", "confusion", "evaluate", "positive_score"]


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    auc: Optional[float]
    confusion: np.ndarray
    n: int


def _pair(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("prediction and truth vectors must have equal length")
    if pred.size == 0:
        raise ValueError("empty vectors")
    return pred, truth


def accuracy(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(pred == truth))


def confusion(pred, truth, n_classes: Optional[int] = None) -> np.ndarray:
    """``out[true, predicted]`` counts."""
    pred, truth = _pair(pred, truth)
    if n_classes is None:
        n_classes = int(max(pred.max(), truth.max())) + 1
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (truth.astype(np.int64), pred.astype(np.int64)), 1)
    return out


def auc_roc(scores, truth) -> float:
    """Probability a random positive outscores a random negative (ties count half).

    Computed from average ranks, which equals the pairwise Mann-Whitney count.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.shape != truth.shape or scores.ndim != 1:
        raise ValueError("scores and truth must be equal-length vectors")
    pos = truth == 1
    n_pos = int(pos.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(pred, truth, n_classes: int, scores=None) -> EvalResult:
    pred, truth = _pair(pred, truth)
    auc = auc_roc(scores, truth) if scores is not None and n_classes == 2 else None
    return EvalResult(accuracy(pred, truth), auc, confusion(pred, truth, n_classes), pred.size)


def positive_score(m, x) -> float:
    """Share of the exit level's trees voting class 1 for row ``x``."""
    x = np.asarray(x, dtype=np.float64)
    return float(m.positive_scores(x.reshape(1, -1))[0])
