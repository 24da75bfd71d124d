"""Versioned JSON model files.

Layout (keys appear in exactly this order, nested maps sorted)::

    {"format_version": 1,
     "schema": {...}, "config": {...},
     "feature_stats": {"max": [...], "median": [...], "min": [...]},
     "levels": [{"level_index": 1, "metric": "f1", "sigma": ...,
                 "forest_config": {...}, "tree_seeds": [...],
                 "trees": [{"feature": [...], "threshold": [...], "left": [...],
                            "right": [...], "leaf_id": [...],
                            "leaf_counts": [[...], ...], "scores": [...]}, ...]},
                ...]}

Floats are written with ``repr`` precision, so a reloaded model predicts
bit-identically and re-saving reproduces the file byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cascade import CascadeLevel, CascadeModel, TrainConfig
from .data import FeatureSchema
from .forest import Forest
from .hem import LeafScoreTable
from .tree import DecisionTree

__all__ = ["FORMAT_VERSION", "ModelFormatError", "save_model", "load_model",
           "model_to_dict", "model_from_dict"]

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """The model file is unreadable, of an unknown version, or inconsistent."""


def _sorted(d: dict) -> dict:
    return {k: d[k] for k in sorted(d)}


def model_to_dict(m: CascadeModel) -> dict:
    s = m.schema
    schema = {
        "columns": [[name, kind] for name, kind in s.columns],
        "label_column": s.label_column,
        "categorical_maps": {k: list(s.categorical_maps[k]) for k in sorted(s.categorical_maps)},
        "class_names": list(s.class_names),
    }
    levels = []
    for lv in m.levels:
        trees = []
        for t, tree in enumerate(lv.forest.trees):
            trees.append({
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "leaf_id": tree.leaf_id.tolist(),
                "leaf_counts": tree.leaf_counts.tolist(),
                "scores": lv.score_table.tree_scores(t).tolist(),
            })
        levels.append({
            "level_index": lv.level_index,
            "metric": lv.score_table.metric,
            "sigma": lv.score_table.sigma,
            "forest_config": _sorted(lv.forest.config_echo),
            "tree_seeds": [int(x) for x in lv.forest.tree_seeds],
            "trees": trees,
        })
    return {
        "format_version": FORMAT_VERSION,
        "schema": schema,
        "config": _sorted(m.config_echo.to_dict()),
        "feature_stats": {
            "max": m.feature_max.tolist(),
            "median": m.feature_medians.tolist(),
            "min": m.feature_min.tolist(),
        },
        "levels": levels,
    }


def _need(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ModelFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def model_from_dict(doc: dict) -> CascadeModel:
    version = _need(doc, "format_version", "model")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r} "
                               f"(this build reads {FORMAT_VERSION})")
    try:
        sd = _need(doc, "schema", "model")
        schema = FeatureSchema(
            columns=tuple((str(n), str(k)) for n, k in _need(sd, "columns", "schema")),
            label_column=_need(sd, "label_column", "schema"),
            categorical_maps={k: tuple(v) for k, v in _need(sd, "categorical_maps", "schema").items()},
            class_names=tuple(_need(sd, "class_names", "schema")),
        )
        cfg = TrainConfig.from_dict(_need(doc, "config", "model"))
        stats = _need(doc, "feature_stats", "model")
        levels = []
        for li, ld in enumerate(_need(doc, "levels", "model")):
            where = f"level {li + 1}"
            trees, scores = [], []
            for ti, td in enumerate(_need(ld, "trees", where)):
                tw = f"{where} tree {ti}"
                tree = DecisionTree(
                    np.asarray(_need(td, "feature", tw)), np.asarray(_need(td, "threshold", tw)),
                    np.asarray(_need(td, "left", tw)), np.asarray(_need(td, "right", tw)),
                    np.asarray(_need(td, "leaf_id", tw)),
                    np.asarray(_need(td, "leaf_counts", tw)).reshape(-1, schema.n_classes),
                    n_classes=schema.n_classes, n_features=schema.n_features,
                )
                try:
                    tree.validate()
                except ValueError as exc:
                    raise ModelFormatError(f"{tw}: {exc}") from None
                sc = np.asarray(_need(td, "scores", tw), dtype=np.float64)
                if sc.ndim != 1 or sc.size != tree.n_leaves:
                    missing = sc.size if sc.ndim == 1 and sc.size < tree.n_leaves else None
                    detail = f" (leaf {missing} has no score)" if missing is not None else ""
                    raise ModelFormatError(
                        f"{tw}: score table has {sc.size} entries for {tree.n_leaves} leaves{detail}")
                trees.append(tree)
                scores.append(sc)
            seeds = [int(s) for s in _need(ld, "tree_seeds", where)]
            forest = Forest(trees, seeds, schema.n_classes, dict(_need(ld, "forest_config", where)))
            offsets = np.concatenate([[0], np.cumsum([s.size for s in scores])]).astype(np.int64)
            table = LeafScoreTable(_need(ld, "metric", where), np.concatenate(scores), offsets,
                                   float(_need(ld, "sigma", where)))
            levels.append(CascadeLevel(forest, table, int(_need(ld, "level_index", where))))
        return CascadeModel(levels, schema, cfg,
                            np.asarray(_need(stats, "median", "feature_stats"), dtype=np.float64),
                            np.asarray(_need(stats, "min", "feature_stats"), dtype=np.float64),
                            np.asarray(_need(stats, "max", "feature_stats"), dtype=np.float64))
    except ModelFormatError:
        raise
    except (TypeError, ValueError, KeyError, AttributeError) as exc:
        raise ModelFormatError(f"invalid model: {exc}") from None


def save_model(m: CascadeModel, path) -> None:
    text = json.dumps(model_to_dict(m), separators=(",", ":"), allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path) -> CascadeModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFormatError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: not a model file")
    return model_from_dict(doc)
