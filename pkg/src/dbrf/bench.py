"""RF-versus-DBRF comparison runs and decision-region grids."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .cascade import CascadeModel, TrainConfig, predict_cascade, train_cascade
from .data import Dataset
from .forest import fit_forest
from .metrics import accuracy, auc_roc

__all__ = ["RunResult", "run_benchmark", "summarize", "write_table", "write_runs",
           "pass_rates", "decision_grid", "grid_bounds"]


@dataclass(frozen=True)
class RunResult:
    method: str
    split: int
    seed: int
    accuracy: float
    auc: Optional[float]
    train_seconds: float
    predict_seconds: float
    n_levels: int = 1
    test_pass_rates: tuple[float, ...] = ()


def pass_rates(level_used: np.ndarray, n_levels: int) -> tuple[float, ...]:
    """Share of rows leaving the cascade at each level (1-based levels)."""
    counts = np.bincount(level_used, minlength=n_levels + 1)[1:]
    return tuple((counts / max(1, level_used.size)).tolist())


def _auc(test: Dataset, scores) -> Optional[float]:
    if test.n_classes != 2 or len(np.unique(test.labels)) < 2:
        return None
    return auc_roc(scores, test.labels)


def run_benchmark(splitter: Callable[[int], tuple[Dataset, Dataset]], n_splits: int,
                  seeds: Sequence[int], cfg: TrainConfig = TrainConfig(),
                  baselines: Iterable[str] = ("rf",), progress=None) -> list[RunResult]:
    """Train every baseline and DBRF on identical splits for every seed.

    ``splitter(j)`` returns the (train, test) pair for split ``j``. The RF
    baseline uses the same tree settings as a single DBRF level.
    """
    baselines = tuple(baselines)
    unknown = set(baselines) - {"rf"}
    if unknown:
        raise ValueError(f"unsupported baselines: {sorted(unknown)}")
    results = []
    for j in range(n_splits):
        train, test = splitter(j)
        for seed in seeds:
            if "rf" in baselines:
                t0 = time.perf_counter()
                f = fit_forest(train, cfg.n_trees, cfg.split_criterion, cfg.limits, seed,
                               cfg.feature_subsample, n_jobs=cfg.n_jobs)
                t1 = time.perf_counter()
                votes = f.votes(test.features)
                pred = np.argmax(votes, axis=1)
                t2 = time.perf_counter()
                scores = votes[:, 1] / f.n_trees if test.n_classes == 2 else None
                results.append(RunResult("rf", j, seed, accuracy(pred, test.labels),
                                         _auc(test, scores), t1 - t0, t2 - t1))
                if progress:
                    progress(results[-1])
            t0 = time.perf_counter()
            model, _ = train_cascade(train, replace(cfg, master_seed=seed))
            t1 = time.perf_counter()
            pred, level_used = predict_cascade(model, test)
            scores = model.positive_scores(test.features) if test.n_classes == 2 else None
            t2 = time.perf_counter()
            results.append(RunResult("dbrf", j, seed, accuracy(pred, test.labels),
                                     _auc(test, scores), t1 - t0, t2 - t1, model.n_levels,
                                     pass_rates(level_used, model.n_levels)))
            if progress:
                progress(results[-1])
    return results


def _mean_std(vals):
    vals = [v for v in vals if v is not None]
    if not vals:
        return None, None
    arr = np.asarray(vals, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0


def summarize(results: Sequence[RunResult]) -> list[dict]:
    rows = []
    for method in dict.fromkeys(r.method for r in results):
        rs = [r for r in results if r.method == method]
        acc_m, acc_s = _mean_std([r.accuracy for r in rs])
        auc_m, auc_s = _mean_std([r.auc for r in rs])
        rows.append(dict(
            method=method, n_runs=len(rs), accuracy_mean=acc_m, accuracy_std=acc_s,
            auc_mean=auc_m, auc_std=auc_s,
            train_seconds_mean=float(np.mean([r.train_seconds for r in rs])),
            predict_seconds_mean=float(np.mean([r.predict_seconds for r in rs])),
        ))
    return rows


TABLE_COLUMNS = ("method", "n_runs", "accuracy_mean", "accuracy_std", "auc_mean", "auc_std",
                 "train_seconds_mean", "predict_seconds_mean")
RUN_COLUMNS = ("method", "split", "seed", "accuracy", "auc", "train_seconds",
               "predict_seconds", "n_levels", "test_pass_rates")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ";".join(repr(x) for x in v)
    return v


def write_table(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c]) for c in TABLE_COLUMNS])


def write_runs(results: Sequence[RunResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for r in results:
            w.writerow([_cell(getattr(r, c)) for c in RUN_COLUMNS])


def grid_bounds(model: CascadeModel, feature: int, margin: float = 0.05) -> tuple[float, float]:
    lo, hi = float(model.feature_min[feature]), float(model.feature_max[feature])
    pad = (hi - lo) * margin if hi > lo else 0.5
    return lo - pad, hi + pad


def decision_grid(model: CascadeModel, features: tuple[int, int], resolution: int = 200,
                  bounds=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Predict on a ``resolution`` x ``resolution`` lattice over two features.

    All other features sit at their training medians. Returns flattened
    ``(x, y, predicted_class)`` arrays, x varying fastest.
    """
    i, j = features
    width = model.schema.n_features
    for k in (i, j):
        if not 0 <= k < width:
            raise ValueError(f"feature index {k} out of range (model has {width} features)")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    (x0, x1), (y0, y1) = bounds if bounds is not None else (grid_bounds(model, i),
                                                            grid_bounds(model, j))
    xs = np.linspace(x0, x1, resolution) if resolution > 1 else np.array([(x0 + x1) / 2])
    ys = np.linspace(y0, y1, resolution) if resolution > 1 else np.array([(y0 + y1) / 2])
    gx, gy = np.meshgrid(xs, ys)
    X = np.tile(model.feature_medians, (gx.size, 1))
    X[:, i] = gx.ravel()
    X[:, j] = gy.ravel()
    return gx.ravel(), gy.ravel(), model.predict(X)

