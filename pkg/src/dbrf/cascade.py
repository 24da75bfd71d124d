"""Cascaded forests trained on successively harder examples.

Training repeatedly fits a forest on the current data, scores its leaves,
optionally drops the least fit trees, and keeps only the rows that are not
easy for the next round. Prediction sends each row down the levels until
one of them deems it easy (or the last level is reached).
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .data import Dataset, FeatureSchema, kfold_indices
from .evolve import evolve
from .forest import Forest, derive_seed, fit_forest
from .hem import METRICS, LeafScoreTable, build_score_table, easy_mask
from .metrics import accuracy
from .tree import CRITERIA, TreeLimits

__all__ = [
    "TrainConfig",
    "CascadeLevel",
    "CascadeModel",
    "LevelRecord",
    "TrainReport",
    "level_seed",
    "validation_accuracy",
    "train_cascade",
    "predict_cascade",
    "class_balance_trace",
]

log = logging.getLogger(__name__)

RULE_NONE = "none"
RULE_ANNUL = "annul_division"
RULE_EARLY_STOP = "early_stop"


@dataclass(frozen=True)
class TrainConfig:
    n_iterations: int = 10
    n_trees: int = 200
    split_criterion: str = "gini"
    hem_metric: str = "f1"
    evolution_ratio: float = 0.2
    evolution_enabled: bool = True
    smart_iteration_enabled: bool = True
    patience: int = 5
    k_folds: int = 5
    min_hard_rows: Optional[int] = None   # None -> 2 * n_classes
    master_seed: int = 0
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    feature_subsample: Optional[int] = None
    # ablation switches
    recompute_sigma_after_evolution: bool = True
    keep_annulled_levels: bool = True
    n_jobs: Optional[int] = None

    def __post_init__(self):
        for name in ("n_iterations", "n_trees", "patience", "min_samples_leaf"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if self.min_hard_rows is not None and self.min_hard_rows < 1:
            raise ValueError("min_hard_rows must be >= 1")
        if not 0.0 <= self.evolution_ratio < 1.0:
            raise ValueError("evolution_ratio must lie in [0, 1)")
        if self.split_criterion not in CRITERIA:
            raise ValueError(f"unknown split criterion {self.split_criterion!r}")
        if self.hem_metric not in METRICS:
            raise ValueError(f"unknown leaf metric {self.hem_metric!r}")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    @property
    def limits(self) -> TreeLimits:
        return TreeLimits(self.max_depth, self.min_samples_leaf, self.min_samples_split)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def level_seed(master_seed: int, level_index: int) -> int:
    """Forest seed of 1-based level ``level_index``; level 1 uses the master seed."""
    return master_seed if level_index == 1 else derive_seed(master_seed, level_index)


@dataclass(eq=False)
class CascadeLevel:
    forest: Forest
    score_table: LeafScoreTable
    level_index: int

    def __post_init__(self):
        self.score_table.check_matches(self.forest)


@dataclass(eq=False)
class CascadeModel:
    levels: list[CascadeLevel]
    schema: FeatureSchema
    config_echo: TrainConfig
    feature_medians: np.ndarray
    feature_min: np.ndarray
    feature_max: np.ndarray

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.levels:
            raise ValueError("a cascade needs at least one level")
        for lv in self.levels:
            if lv.forest.n_classes != self.schema.n_classes:
                raise ValueError(f"level {lv.level_index}: class count differs from schema")
            if lv.forest.n_features != self.schema.n_features:
                raise ValueError(f"level {lv.level_index}: feature width differs from schema")
            lv.score_table.check_matches(lv.forest)
        for arr in (self.feature_medians, self.feature_min, self.feature_max):
            if np.shape(arr) != (self.schema.n_features,):
                raise ValueError("feature statistics have the wrong length")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    def _route(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.schema.n_features:
            raise ValueError(f"expected rows of width {self.schema.n_features}")
        n = X.shape[0]
        pred = np.empty(n, dtype=np.int64)
        level_used = np.zeros(n, dtype=np.int64)
        pos_share = np.zeros(n, dtype=np.float64)
        active = np.arange(n)
        for i, lv in enumerate(self.levels):
            if active.size == 0:
                break
            leaves = lv.forest.apply(X[active])
            votes = lv.forest.votes(leaves=leaves)
            if i == len(self.levels) - 1:
                exit_now = np.ones(active.size, dtype=bool)
            else:
                exit_now = easy_mask(lv.forest, lv.score_table, leaves=leaves)
            rows = active[exit_now]
            pred[rows] = np.argmax(votes[exit_now], axis=1)
            level_used[rows] = lv.level_index
            if self.n_classes == 2:
                pos_share[rows] = votes[exit_now, 1] / lv.forest.n_trees
            active = active[~exit_now]
        return pred, level_used, pos_share

    def predict(self, X) -> np.ndarray:
        return self._route(X)[0]

    def positive_scores(self, X) -> np.ndarray:
        if self.n_classes != 2:
            raise ValueError("positive scores need a binary model")
        return self._route(X)[2]


@dataclass
class LevelRecord:
    level_index: int
    n_rows_in: int
    n_easy: int
    n_hard: int
    class_counts_in: list[int]
    class_counts_hard: list[int]
    n_trees_kept: int
    sigma: float
    validation_accuracy: Optional[float] = None
    easy_validation_accuracy: Optional[float] = None
    rule_triggered: str = RULE_NONE
    fit_seconds: float = 0.0


@dataclass
class TrainReport:
    levels: list[LevelRecord] = field(default_factory=list)
    stop_reason: str = "n_iterations"

    CSV_COLUMNS = ("level_index", "n_rows_in", "n_easy", "n_hard", "class_counts_in",
                   "class_counts_hard", "n_trees_kept", "sigma", "validation_accuracy",
                   "easy_validation_accuracy", "rule_triggered", "fit_seconds")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.CSV_COLUMNS)
            for rec in self.levels:
                row = []
                for col in self.CSV_COLUMNS:
                    v = getattr(rec, col)
                    if isinstance(v, list):
                        v = ";".join(str(c) for c in v)
                    elif v is None:
                        v = ""
                    elif isinstance(v, float):
                        v = repr(v)
                    row.append(v)
                w.writerow(row)


def validation_accuracy(d: Dataset, cfg: TrainConfig,
                        seed: Optional[int] = None) -> tuple[float, np.ndarray]:
    """Stratified k-fold out-of-fold accuracy of a plain forest on ``d``.

    Returns ``(accuracy, oof_predictions)``; the predictions let callers score
    any subset of ``d`` without refitting.
    """
    if len(d) < cfg.k_folds:
        raise ValueError(f"{len(d)} rows is too few for {cfg.k_folds}-fold validation")
    seed = cfg.master_seed if seed is None else seed
    oof = np.empty(len(d), dtype=np.int64)
    for fold, (tr, va) in enumerate(kfold_indices(len(d), cfg.k_folds, d.labels, seed)):
        f = fit_forest(d.take(tr), cfg.n_trees, cfg.split_criterion, cfg.limits,
                       derive_seed(seed, fold), cfg.feature_subsample, n_jobs=cfg.n_jobs)
        oof[va] = f.predict(d.features[va])
    return accuracy(oof, d.labels), oof


def train_cascade(train: Dataset, cfg: TrainConfig = TrainConfig()
                  ) -> tuple[CascadeModel, TrainReport]:
    if len(train) == 0:
        raise ValueError("empty training set")
    n_classes = train.n_classes
    min_hard = cfg.min_hard_rows if cfg.min_hard_rows is not None else 2 * n_classes
    report = TrainReport()
    levels: list[CascadeLevel] = []
    D = train
    prev_acc = None
    decreases = 0

    for it in range(1, cfg.n_iterations + 1):
        t0 = time.perf_counter()
        forest = fit_forest(D, cfg.n_trees, cfg.split_criterion, cfg.limits,
                            level_seed(cfg.master_seed, it), cfg.feature_subsample,
                            n_jobs=cfg.n_jobs)
        leaves = forest.apply(D.features)
        table = build_score_table(forest, D, cfg.hem_metric, leaves)
        if cfg.evolution_enabled:
            forest, table, fit_rep = evolve(forest, table, cfg.evolution_ratio,
                                            cfg.recompute_sigma_after_evolution)
            leaves = leaves[:, list(fit_rep.survivors)]
        mask = easy_mask(forest, table, leaves=leaves)
        hard_idx = np.flatnonzero(~mask)

        rule = RULE_NONE
        val_acc = easy_acc = None
        if cfg.smart_iteration_enabled and len(D) >= cfg.k_folds:
            val_acc, oof = validation_accuracy(D, cfg, derive_seed(cfg.master_seed, it, 1))
            if mask.any():
                easy_acc = accuracy(oof[mask], D.labels[mask])
            decreases = decreases + 1 if prev_acc is not None and val_acc < prev_acc else 0
            prev_acc = val_acc
            if decreases >= cfg.patience:
                rule = RULE_EARLY_STOP
            elif easy_acc is not None and easy_acc < val_acc:
                rule = RULE_ANNUL

        rec = LevelRecord(
            level_index=it, n_rows_in=len(D), n_easy=int(mask.sum()),
            n_hard=int(hard_idx.size),
            class_counts_in=D.class_counts().tolist(),
            class_counts_hard=np.bincount(D.labels[hard_idx], minlength=n_classes).tolist(),
            n_trees_kept=forest.n_trees, sigma=table.sigma,
            validation_accuracy=val_acc, easy_validation_accuracy=easy_acc,
            rule_triggered=rule, fit_seconds=time.perf_counter() - t0,
        )
        report.levels.append(rec)
        if rule != RULE_ANNUL or cfg.keep_annulled_levels:
            levels.append(CascadeLevel(forest, table, len(levels) + 1))
        log.info("level %d: %d rows in, %d easy, rule=%s, val_acc=%s",
                 it, rec.n_rows_in, rec.n_easy, rule, val_acc)

        if rule == RULE_EARLY_STOP:
            report.stop_reason = RULE_EARLY_STOP
            break
        if rule == RULE_ANNUL:
            continue
        if it == cfg.n_iterations:
            break
        hard_classes = np.count_nonzero(rec.class_counts_hard)
        if hard_idx.size < min_hard or hard_classes < 2:
            report.stop_reason = "hard_set_exhausted"
            break
        D = D.take(hard_idx)

    if not levels:
        # every level was annulled and discarded; fall back to the last forest
        levels.append(CascadeLevel(forest, table, 1))
    X = train.features
    model = CascadeModel(levels, train.schema, cfg, np.median(X, axis=0),
                         X.min(axis=0), X.max(axis=0))
    return model, report


def predict_cascade(m: CascadeModel, test) -> tuple[np.ndarray, np.ndarray]:
    """Predicted class and 1-based exit level for every row."""
    if isinstance(test, Dataset):
        if test.schema.n_features != m.schema.n_features:
            raise ValueError("test set does not match the model schema")
        X = test.features
    else:
        X = test
    pred, level_used, _ = m._route(X)
    return pred, level_used


def class_balance_trace(report: TrainReport) -> list[float]:
    """Negative-to-positive ratio of each level's input rows (``inf`` if no positives)."""
    out = []
    for rec in report.levels:
        if len(rec.class_counts_in) != 2:
            raise ValueError("class balance trace needs a binary report")
        neg, pos = rec.class_counts_in
        out.append(neg / pos if pos else math.inf)
    return out
