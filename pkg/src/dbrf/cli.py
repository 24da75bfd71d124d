"""Command-line entry point: ``dbrf train|predict|evaluate|benchmark|grid``.

Every command writes a JSON run manifest next to its main output (or to
``--manifest``) recording the resolved configuration, input digests, output
paths and per-phase timings.

Exit codes: 0 success, 1 usage or configuration error, 2 data or model file
error, 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bench import (decision_grid, grid_bounds, run_benchmark, summarize, write_runs,
                    write_table)
from .cascade import TrainConfig, train_cascade
from .data import DataError, SplitSpec, head_split, load_csv, load_features, train_test_split
from .hem import METRICS
from .metrics import evaluate
from .persist import ModelFormatError, load_model, save_model
from .tree import CRITERIA

__all__ = ["main", "RunManifest", "build_parser"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("dbrf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default, which we reserve for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: Optional[int]
    inputs: dict = field(default_factory=dict)     # path -> sha256
    outputs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)    # phase -> seconds
    version: str = __version__

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Timer:
    def __init__(self, manifest: RunManifest, phase: str):
        self.manifest, self.phase = manifest, phase

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.manifest.timings[self.phase] = max(0.0, time.perf_counter() - self.t0)


def _int_list(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _seed_list(text: str) -> list[int]:
    """``"5"`` means seeds 0..4; ``"3,7,11"`` lists them explicitly."""
    if "," not in text:
        try:
            n = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed list {text!r}")
        if n < 1:
            raise argparse.ArgumentTypeError("need at least one seed")
        return list(range(n))
    return _int_list(text)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--label", help="label column (default: last column)")
    g.add_argument("--missing", choices=("drop", "impute"), default="drop",
                   help="handling of empty/'?' cells")
    g.add_argument("--use-features", type=_int_list, metavar="I,J,...",
                   help="train on these 0-based feature indices only")
    g.add_argument("--trees", type=int, default=200)
    g.add_argument("--iters", type=int, default=10)
    g.add_argument("--metric", choices=tuple(METRICS), default="f1")
    g.add_argument("--criterion", choices=tuple(CRITERIA), default="gini")
    g.add_argument("--evolution-ratio", type=float, default=0.2)
    g.add_argument("--no-evolution", action="store_true")
    g.add_argument("--no-smart-iter", action="store_true")
    g.add_argument("--patience", type=int, default=5)
    g.add_argument("--kfolds", type=int, default=5)
    g.add_argument("--min-hard-rows", type=int)
    g.add_argument("--max-depth", type=int)
    g.add_argument("--min-samples-leaf", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, help="worker thread cap (results do not change)")
    p.add_argument("--manifest", help="run manifest path (default: next to the main output)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dbrf", description="Cascaded random forests with hard example mining.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a cascade and write the model and level report")
    t.add_argument("--data", required=True)
    t.add_argument("--model", required=True, help="output model file")
    t.add_argument("--report", help="per-level report CSV (default: <model>.report.csv)")
    _add_train_flags(t)
    _add_common(t)

    pr = sub.add_parser("predict", help="predict a CSV with a trained model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", required=True)
    _add_common(pr)

    ev = sub.add_parser("evaluate", help="accuracy / AUC / confusion of a model on a labelled CSV")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out", required=True, help="metrics CSV (metric,value)")
    _add_common(ev)

    b = sub.add_parser("benchmark", help="RF versus DBRF on identical splits")
    b.add_argument("--data", required=True)
    b.add_argument("--out", required=True, help="summary table CSV")
    b.add_argument("--runs-out", help="per-run CSV")
    b.add_argument("--splits", type=int, default=1, help="number of random train/test splits")
    b.add_argument("--seeds", type=_seed_list, default=[0],
                   help="seed count N (0..N-1) or explicit comma list")
    b.add_argument("--baselines", default="rf")
    b.add_argument("--train-fraction", type=float, default=0.67)
    b.add_argument("--train-rows", type=int,
                   help="fixed split: first K rows train, rest test (overrides --train-fraction)")
    b.add_argument("--split-seed", type=int, default=0, help="seed of split 0; split j uses +j")
    _add_train_flags(b)
    b.set_defaults(seed=None)
    _add_common(b)

    g = sub.add_parser("grid", help="decision-region lattice over two features")
    g.add_argument("--model", required=True)
    g.add_argument("--features", type=_int_list, required=True, metavar="I,J")
    g.add_argument("--resolution", type=int, default=200)
    g.add_argument("--bounds", default="auto", help="'auto' or x0,x1,y0,y1")
    g.add_argument("--out", required=True)
    _add_common(g)
    return p


def _config(args) -> TrainConfig:
    try:
        return TrainConfig(
            n_iterations=args.iters, n_trees=args.trees, split_criterion=args.criterion,
            hem_metric=args.metric, evolution_ratio=args.evolution_ratio,
            evolution_enabled=not args.no_evolution,
            smart_iteration_enabled=not args.no_smart_iter, patience=args.patience,
            k_folds=args.kfolds, min_hard_rows=args.min_hard_rows,
            master_seed=args.seed if args.seed is not None else 0,
            max_depth=args.max_depth, min_samples_leaf=args.min_samples_leaf,
            n_jobs=args.threads,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_training(args):
    d = load_csv(args.data, args.label, args.missing)
    if args.use_features:
        bad = [i for i in args.use_features if not 0 <= i < d.n_features]
        if bad:
            raise UsageError(f"--use-features index {bad[0]} out of range "
                             f"(data has {d.n_features} features)")
        d = d.select_features(args.use_features)
    return d


def _manifest_path(args, default_from) -> Path:
    return Path(args.manifest) if args.manifest else Path(str(default_from) + ".manifest.json")


def cmd_train(args) -> int:
    cfg = _config(args)
    man = RunManifest("train", cfg.to_dict(), cfg.master_seed)
    man.add_input(args.data)
    with _Timer(man, "load"):
        d = _load_training(args)
    man.config["use_features"] = args.use_features
    with _Timer(man, "train"):
        model, report = train_cascade(d, cfg)
    report_path = args.report or f"{args.model}.report.csv"
    with _Timer(man, "write"):
        save_model(model, args.model)
        report.to_csv(report_path)
    man.outputs = [str(args.model), str(report_path)]
    man.write(_manifest_path(args, args.model))
    print(f"trained {model.n_levels} level(s) on {len(d)} rows "
          f"(stop: {report.stop_reason}); model -> {args.model}")
    return EXIT_OK


def _predict_rows(args, man):
    with _Timer(man, "load"):
        model = load_model(args.model)
        X, row_ids, labels = load_features(args.data, model.schema, model.feature_medians)
    with _Timer(man, "predict"):
        pred, level_used, pos = model._route(X)
    return model, row_ids, labels, pred, level_used, pos


def cmd_predict(args) -> int:
    man = RunManifest("predict", {"threads": args.threads}, None)
    man.add_input(args.model)
    man.add_input(args.data)
    model, row_ids, _, pred, level_used, pos = _predict_rows(args, man)
    binary = model.n_classes == 2
    with _Timer(man, "write"), open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_id", "predicted", "level_used"] + (["positive_score"] if binary else []))
        names = model.schema.class_names
        for k in range(pred.size):
            row = [int(row_ids[k]), names[pred[k]], int(level_used[k])]
            if binary:
                row.append(repr(float(pos[k])))
            w.writerow(row)
    man.outputs = [str(args.out)]
    man.write(_manifest_path(args, args.out))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    man = RunManifest("evaluate", {"threads": args.threads}, None)
    man.add_input(args.model)
    man.add_input(args.data)
    model, _, labels, pred, level_used, pos = _predict_rows(args, man)
    if labels is None:
        raise DataError(f"{args.data}: label column {model.schema.label_column!r} absent")
    binary = model.n_classes == 2 and np.unique(labels).size == 2
    res = evaluate(pred, labels, model.n_classes, pos if binary else None)
    rows = [("n_rows", res.n), ("accuracy", res.accuracy)]
    if res.auc is not None:
        rows.append(("auc", res.auc))
    for lv in range(1, model.n_levels + 1):
        rows.append((f"pass_rate_level_{lv}", float(np.mean(level_used == lv))))
    names = model.schema.class_names
    for i in range(model.n_classes):
        for j in range(model.n_classes):
            rows.append((f"confusion[{names[i]}][{names[j]}]", int(res.confusion[i, j])))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in rows:
            w.writerow([k, repr(v) if isinstance(v, float) else v])
    man.outputs = [str(args.out)]
    man.write(_manifest_path(args, args.out))
    print(f"accuracy {res.accuracy:.4f}" + (f", auc {res.auc:.4f}" if res.auc is not None else ""))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    baselines = [b.strip() for b in args.baselines.split(",") if b.strip()]
    if any(b != "rf" for b in baselines):
        raise UsageError(f"unsupported baseline(s): {args.baselines!r} (only 'rf')")
    if args.splits < 1:
        raise UsageError("--splits must be >= 1")
    if args.train_rows is not None and args.splits != 1:
        raise UsageError("--train-rows defines a single fixed split; use --splits 1")
    try:
        spec0 = SplitSpec(args.train_fraction, True, args.split_seed)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    conf = cfg.to_dict()
    conf.update(splits=args.splits, seeds=args.seeds, baselines=baselines,
                train_fraction=args.train_fraction, train_rows=args.train_rows,
                split_seed=args.split_seed, use_features=args.use_features)
    man = RunManifest("benchmark", conf, args.seeds[0])
    man.add_input(args.data)
    with _Timer(man, "load"):
        d = _load_training(args)

    def splitter(j):
        if args.train_rows is not None:
            return head_split(d, args.train_rows)
        return train_test_split(d, SplitSpec(spec0.train_fraction, True, args.split_seed + j))

    def progress(r):
        log.info("%s split %d seed %d: accuracy %.4f (%.1fs)", r.method, r.split, r.seed,
                 r.accuracy, r.train_seconds)

    with _Timer(man, "benchmark"):
        results = run_benchmark(splitter, args.splits, args.seeds, cfg, baselines, progress)
    rows = summarize(results)
    write_table(rows, args.out)
    man.outputs = [str(args.out)]
    if args.runs_out:
        write_runs(results, args.runs_out)
        man.outputs.append(str(args.runs_out))
    man.write(_manifest_path(args, args.out))
    for r in rows:
        print(f"{r['method']:>5}: accuracy {r['accuracy_mean']:.4f} +/- {r['accuracy_std']:.4f} "
              f"over {r['n_runs']} run(s)")
    return EXIT_OK


def cmd_grid(args) -> int:
    if len(args.features) != 2:
        raise UsageError("--features takes exactly two indices")
    if args.resolution < 1:
        raise UsageError("--resolution must be >= 1")
    man = RunManifest("grid", {"features": args.features, "resolution": args.resolution,
                               "bounds": args.bounds}, None)
    man.add_input(args.model)
    with _Timer(man, "load"):
        model = load_model(args.model)
    i, j = args.features
    for k in (i, j):
        if not 0 <= k < model.schema.n_features:
            raise UsageError(f"feature index {k} out of range "
                             f"(model has {model.schema.n_features} features)")
    if args.bounds == "auto":
        bounds = (grid_bounds(model, i), grid_bounds(model, j))
    else:
        try:
            x0, x1, y0, y1 = (float(v) for v in args.bounds.split(","))
        except ValueError:
            raise UsageError(f"--bounds expects 'auto' or x0,x1,y0,y1, got {args.bounds!r}")
        bounds = ((x0, x1), (y0, y1))
    man.config["resolved_bounds"] = [list(bounds[0]), list(bounds[1])]
    with _Timer(man, "predict"):
        gx, gy, pred = decision_grid(model, (i, j), args.resolution, bounds)
    names = model.schema.class_names
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "predicted"])
        for x, y, c in zip(gx.tolist(), gy.tolist(), pred.tolist()):
            w.writerow([repr(x), repr(y), names[c]])
    man.outputs = [str(args.out)]
    man.write(_manifest_path(args, args.out))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "benchmark": cmd_benchmark, "grid": cmd_grid}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("dbrf: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dbrf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFormatError, OSError, ValueError) as exc:
        # ValueError here is a degenerate input (too few rows, one class, ...)
        print(f"dbrf: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # an invariant broke somewhere below us
        log.debug("internal error", exc_info=True)
        print(f"dbrf: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
