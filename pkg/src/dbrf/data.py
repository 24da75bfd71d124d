"""Dataset ingestion, encoding, deterministic splitting and k-fold indices."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "DataError",
    "FeatureSchema",
    "Dataset",
    "SplitSpec",
    "load_csv",
    "load_features",
    "encode_frame",
    "train_test_split",
    "head_split",
    "kfold_indices",
    "make_blobs",
]

MISSING_TOKENS = frozenset({"", "?"})


class DataError(ValueError):
    """Raised for unreadable, malformed or unusable input data."""


@dataclass(frozen=True)
class FeatureSchema:
    """Column layout plus the category and class code books.

    ``columns`` lists ``(name, kind)`` pairs for the feature columns only, in
    the order they appear in the encoded matrix; ``kind`` is ``"numeric"`` or
    ``"categorical"``. ``categorical_maps[name][code]`` is the original string.
    """

    columns: tuple[tuple[str, str], ...]
    label_column: str
    categorical_maps: dict[str, tuple[str, ...]] = field(default_factory=dict)
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.class_names) < 2:
            raise DataError("a schema needs at least 2 classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError("duplicate class names")
        for name, kind in self.columns:
            if kind not in ("numeric", "categorical"):
                raise DataError(f"column {name!r}: unknown kind {kind!r}")
            if kind == "categorical":
                cats = self.categorical_maps.get(name)
                if cats is None or len(set(cats)) != len(cats):
                    raise DataError(f"column {name!r}: bad category map")

    @property
    def n_features(self) -> int:
        return len(self.columns)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def feature_names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def encode_value(self, column: str, value: str) -> int:
        try:
            return self.categorical_maps[column].index(value)
        except ValueError:
            raise DataError(f"column {column!r}: unknown category {value!r}") from None

    def decode_value(self, column: str, code: int) -> str:
        return self.categorical_maps[column][int(code)]

    def encode_label(self, value: str) -> int:
        try:
            return self.class_names.index(value)
        except ValueError:
            raise DataError(f"unknown class label {value!r}") from None

    def decode_label(self, code: int) -> str:
        return self.class_names[int(code)]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded feature matrix with labels and stable row identifiers."""

    features: np.ndarray
    labels: np.ndarray
    row_ids: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        ids = np.ascontiguousarray(self.row_ids, dtype=np.int64)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if not (X.shape[0] == y.shape[0] == ids.shape[0]):
            raise DataError("features, labels and row_ids disagree on row count")
        if X.shape[1] != self.schema.n_features:
            raise DataError(
                f"matrix has {X.shape[1]} columns, schema has {self.schema.n_features}")
        if y.size and (y.min() < 0 or y.max() >= self.schema.n_classes):
            raise DataError("label out of range for schema")
        if np.unique(ids).size != ids.size:
            raise DataError("row_ids must be unique")
        for arr in (X, y, ids):
            arr.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "row_ids", ids)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    def take(self, idx) -> "Dataset":
        """Rows ``idx`` (positions, not row ids) as a new dataset."""
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.row_ids[idx], self.schema)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def select_features(self, columns: Sequence[int]) -> "Dataset":
        cols = [int(c) for c in columns]
        names = {self.schema.columns[c][0] for c in cols}
        schema = FeatureSchema(
            columns=tuple(self.schema.columns[c] for c in cols),
            label_column=self.schema.label_column,
            categorical_maps={k: v for k, v in self.schema.categorical_maps.items()
                              if k in names},
            class_names=self.schema.class_names,
        )
        return Dataset(self.features[:, cols], self.labels, self.row_ids, schema)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.67
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must lie in (0, 1)")


# -- loading ---------------------------------------------------------------

def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        except csv.Error as exc:
            raise DataError(f"{path}: unparsable header ({exc})") from None
        if not header or any(h == "" for h in header) or len(set(header)) != len(header):
            raise DataError(f"{path}: unparsable header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            rows.append([c.strip() for c in row])
    return header, rows


def load_csv(path, label_column: Optional[str] = None, missing_policy: str = "drop",
             schema: Optional[FeatureSchema] = None) -> Dataset:
    """Read a headed CSV into an encoded :class:`Dataset`.

    Numeric columns (every present cell parses as a float) are kept as reals;
    anything else is ordinal-encoded in first-appearance order. Class labels
    are coded in sorted order (numerically when all labels are numbers).
    Empty and ``?`` cells count as missing; ``missing_policy`` is ``"drop"``
    (discard the row) or ``"impute"`` (column median / mode). Rows missing
    the label are always dropped. ``row_ids`` are 0-based data-row positions
    in the file.

    Passing an existing ``schema`` re-uses its code books, so a test file is
    encoded exactly like the training file.
    """
    path = Path(path)
    if missing_policy not in ("drop", "impute"):
        raise DataError(f"unknown missing_policy {missing_policy!r}")
    header, rows = _read_rows(path)
    if label_column is None:
        label_column = schema.label_column if schema is not None else header[-1]
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} absent")
    return encode_frame(header, rows, label_column, missing_policy, schema, source=str(path))


def load_features(path, schema: FeatureSchema, fill_values=None):
    """Encode the schema's feature columns of a CSV for prediction.

    Columns are matched by name (extra columns are ignored). Missing cells
    take ``fill_values[j]`` (typically the training medians). Returns
    ``(X, row_ids, labels)`` where ``labels`` is ``None`` when the file has no
    label column.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    pos = {h: i for i, h in enumerate(header)}
    for name, _ in schema.columns:
        if name not in pos:
            raise DataError(f"{path}: column {name!r} required by the model is absent")
    X = np.empty((len(rows), schema.n_features), dtype=np.float64)
    for j, (name, kind) in enumerate(schema.columns):
        i = pos[name]
        lookup = ({c: k for k, c in enumerate(schema.categorical_maps[name])}
                  if kind == "categorical" else None)
        for r, row in enumerate(rows):
            cell = row[i]
            if cell in MISSING_TOKENS:
                if fill_values is None:
                    raise DataError(f"{path}: column {name!r} has a missing value in data row {r}")
                X[r, j] = fill_values[j]
            elif lookup is None:
                try:
                    X[r, j] = float(cell)
                except ValueError:
                    raise DataError(f"{path}: column {name!r}: {cell!r} is not numeric") from None
            else:
                if cell not in lookup:
                    raise DataError(f"{path}: column {name!r}: unknown category {cell!r}")
                X[r, j] = lookup[cell]
    labels = None
    if schema.label_column in pos:
        li = pos[schema.label_column]
        try:
            labels = np.array([schema.class_names.index(row[li]) for row in rows], dtype=np.int64)
        except ValueError:
            bad = next(row[li] for row in rows if row[li] not in schema.class_names)
            raise DataError(f"{path}: column {schema.label_column!r}: unknown class {bad!r}") from None
    return X, np.arange(len(rows), dtype=np.int64), labels


def encode_frame(header: list[str], rows: list[list[str]], label_column: str,
                 missing_policy: str = "drop", schema: Optional[FeatureSchema] = None,
                 source: str = "<rows>") -> Dataset:
    """Encode already-split string cells; the workhorse behind :func:`load_csv`."""
    li = header.index(label_column)
    feat_idx = [i for i in range(len(header)) if i != li]
    row_ids = np.arange(len(rows), dtype=np.int64)

    keep = [r[li] not in MISSING_TOKENS for r in rows]
    if missing_policy == "drop":
        keep = [k and all(r[i] not in MISSING_TOKENS for i in feat_idx)
                for k, r in zip(keep, rows)]
    rows = [r for r, k in zip(rows, keep) if k]
    row_ids = row_ids[np.asarray(keep, dtype=bool)] if len(keep) else row_ids
    if not rows:
        raise DataError(f"{source}: no rows left after applying missing_policy={missing_policy!r}")

    if schema is None:
        schema = _infer_schema(header, rows, li, feat_idx, label_column, source)
    else:
        expected = [name for name, _ in schema.columns]
        got = [header[i] for i in feat_idx]
        if got != expected:
            missing = [c for c in expected if c not in got]
            extra = [c for c in got if c not in expected]
            what = missing[0] if missing else (extra[0] if extra else got[0])
            raise DataError(f"{source}: column {what!r} does not match the model schema")

    X = np.empty((len(rows), len(feat_idx)), dtype=np.float64)
    for j, (i, (name, kind)) in enumerate(zip(feat_idx, schema.columns)):
        col = [r[i] for r in rows]
        present = [c not in MISSING_TOKENS for c in col]
        if kind == "numeric":
            try:
                vals = [float(c) if p else math.nan for c, p in zip(col, present)]
            except ValueError:
                raise DataError(f"{source}: column {name!r} has a non-numeric value") from None
            X[:, j] = vals
            if not all(present):
                X[~np.asarray(present), j] = float(np.nanmedian(X[:, j])) if any(present) else 0.0
        else:
            cats = schema.categorical_maps[name]
            lookup = {c: k for k, c in enumerate(cats)}
            codes = np.full(len(col), -1, dtype=np.int64)
            for k, (c, p) in enumerate(zip(col, present)):
                if p:
                    if c not in lookup:
                        raise DataError(f"{source}: column {name!r}: unknown category {c!r}")
                    codes[k] = lookup[c]
            if not all(present):
                known = codes[codes >= 0]
                codes[codes < 0] = np.bincount(known).argmax() if known.size else 0
            X[:, j] = codes
    try:
        y = np.array([schema.class_names.index(r[li]) for r in rows], dtype=np.int64)
    except ValueError:
        bad = next(r[li] for r in rows if r[li] not in schema.class_names)
        raise DataError(f"{source}: unknown class label {bad!r}") from None
    return Dataset(X, y, row_ids, schema)


def _infer_schema(header, rows, li, feat_idx, label_column, source) -> FeatureSchema:
    columns = []
    cat_maps = {}
    for i in feat_idx:
        present = [r[i] for r in rows if r[i] not in MISSING_TOKENS]
        if present and all(_is_float(c) for c in present):
            columns.append((header[i], "numeric"))
        else:
            columns.append((header[i], "categorical"))
            cat_maps[header[i]] = tuple(dict.fromkeys(present))
    labels = list(dict.fromkeys(r[li] for r in rows))
    if len(labels) < 2:
        raise DataError(f"{source}: need at least 2 distinct labels, found {len(labels)}")
    if all(_is_float(v) for v in labels):
        labels.sort(key=lambda v: (float(v), v))
    else:
        labels.sort()
    return FeatureSchema(tuple(columns), label_column, cat_maps, tuple(labels))


# -- splitting -------------------------------------------------------------

def _largest_remainder(sizes: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``sizes``."""
    exact = sizes * (total / sizes.sum())
    alloc = np.floor(exact).astype(np.int64)
    rem = exact - alloc
    order = np.argsort(-rem, kind="stable")
    for c in order[: total - alloc.sum()]:
        alloc[c] += 1
    return alloc


def train_test_split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Random (optionally stratified) train/test split; row order is kept."""
    n = len(d)
    if n < 2:
        raise DataError("need at least 2 rows to split")
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    if n_train < 1 or n_train > n - 1:
        raise DataError(f"train_fraction {spec.train_fraction} leaves one side empty")
    rng = np.random.default_rng(spec.seed)
    is_train = np.zeros(n, dtype=bool)
    if spec.stratified:
        classes = np.flatnonzero(d.class_counts())
        members = [np.flatnonzero(d.labels == c) for c in classes]
        alloc = _largest_remainder(np.array([m.size for m in members], dtype=float), n_train)
        for m, k in zip(members, alloc):
            is_train[rng.permutation(m)[:k]] = True
    else:
        is_train[rng.permutation(n)[:n_train]] = True
    return d.take(np.flatnonzero(is_train)), d.take(np.flatnonzero(~is_train))


def head_split(d: Dataset, n_train: int) -> tuple[Dataset, Dataset]:
    """Fixed split: the first ``n_train`` rows train, the rest test."""
    if not 1 <= n_train < len(d):
        raise DataError(f"n_train={n_train} leaves one side empty")
    return d.take(np.arange(n_train)), d.take(np.arange(n_train, len(d)))


def kfold_indices(n_rows: int, k: int, stratify_labels=None, seed: int = 0):
    """``k`` (train_idx, valid_idx) pairs whose validation folds partition ``range(n_rows)``.

    With ``stratify_labels`` each class is dealt round-robin across the folds,
    so per-class fold counts differ by at most one as well.
    """
    if not 2 <= k <= n_rows:
        raise DataError(f"k={k} out of range for {n_rows} rows")
    rng = np.random.default_rng(seed)
    if stratify_labels is None:
        order = rng.permutation(n_rows)
    else:
        labels = np.asarray(stratify_labels)
        if labels.shape[0] != n_rows:
            raise DataError("stratify_labels length differs from n_rows")
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c))
                                for c in np.unique(labels)])
    fold_of = np.empty(n_rows, dtype=np.int64)
    fold_of[order] = np.arange(n_rows) % k
    folds = []
    for f in range(k):
        folds.append((np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)))
    return folds


# -- synthetic data ----------------------------------------------------------

def make_blobs(n_rows: int, n_features: int = 2, class_weights=(0.5, 0.5),
               separation: float = 3.0, seed: int = 0) -> Dataset:
    """Gaussian class blobs with unit covariance, centres ``separation`` apart.

    Class ``c`` is centred at ``c * separation`` along the first two axes.
    Row counts per class follow ``class_weights`` by largest remainder, with
    every class getting at least one row.
    """
    w = np.asarray(class_weights, dtype=float)
    if w.size < 2 or (w <= 0).any():
        raise DataError("class_weights needs >= 2 positive entries")
    if n_rows < w.size:
        raise DataError("fewer rows than classes")
    counts = np.maximum(_largest_remainder(w, n_rows), 1)
    counts[np.argmax(counts)] -= counts.sum() - n_rows
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, n_features))
    y = np.repeat(np.arange(w.size), counts)
    axes = min(2, n_features)
    X[:, :axes] += (y * separation)[:, None]
    perm = rng.permutation(n_rows)
    schema = FeatureSchema(
        columns=tuple((f"x{j}", "numeric") for j in range(n_features)),
        label_column="y",
        class_names=tuple(str(c) for c in range(w.size)),
    )
    return Dataset(X[perm], y[perm], np.arange(n_rows), schema)
