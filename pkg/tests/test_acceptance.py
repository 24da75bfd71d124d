"""Acceptance criteria, one test each, each printing a single PASS/FAIL line.

The benchmark criteria (3, 4, 5) train on the bundled UCI copies and take
minutes; criterion 7's optional credit-card run needs ``DBRF_CREDITCARD_CSV``
pointing at the Kaggle ``creditcard.csv`` file.

Run alone with ``pytest -s tests/test_acceptance.py`` or
``python tests/test_acceptance.py``.
"""
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from dbrf.bench import decision_grid, run_benchmark
from dbrf.cascade import TrainConfig, class_balance_trace, train_cascade
from dbrf.data import SplitSpec, head_split, load_csv, make_blobs, train_test_split
from dbrf.evolve import tree_fitness
from dbrf.forest import fit_forest
from dbrf.hem import build_score_table, easy_mask
from dbrf.metrics import auc_roc

import _oracles as oracle
from conftest import ACCEPTANCE_LINES, DATA_DIR, make_dataset
from test_hem import HAND_X, HAND_Y, hand_forest

SEEDS5 = range(5)

# reference accuracies (percent) and tolerances (points)
YEAST_REF, YEAST_TOL = 63.90, 2.5
LETTER_REF, LETTER_TOL, LETTER_RF_SLACK = 97.25, 1.5, 0.2
ADULT_REF, ADULT_TOL = 86.62, 1.5
IRIS_FLOOR = 94.0
ENRICHED_RATIO = 20.0
CREDIT_AUC_FLOOR = 0.95
ORACLE_TOL = 1e-12


def report(criterion, ok, detail, seconds=None):
    timing = f" [{seconds:.1f}s]" if seconds is not None else ""
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}{timing}"
    ACCEPTANCE_LINES.append(line)
    sys.__stdout__.write("\n" + line + "\n")
    sys.__stdout__.flush()
    assert ok, line


def exact_mean(correct_counts, sizes):
    """Mean accuracy as an exact rational, so equal means compare equal."""
    return sum(Fraction(c, n) for c, n in zip(correct_counts, sizes)) / len(sizes)


def paired_runs(splitter, seeds, cfg=TrainConfig()):
    """RF and DBRF on the same split per seed; returns correct counts and test sizes."""
    rf, db, sizes = [], [], []
    for seed in seeds:
        res = run_benchmark(lambda _: splitter(seed), 1, [seed], cfg)
        n = len(splitter(seed)[1])
        by = {r.method: r for r in res}
        rf.append(round(by["rf"].accuracy * n))
        db.append(round(by["dbrf"].accuracy * n))
        sizes.append(n)
    return exact_mean(rf, sizes), exact_mean(db, sizes)


# -- 1 ---------------------------------------------------------------------

def test_criterion_1_rf_equivalence():
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(50):
        rng = np.random.default_rng(1000 + i)
        n, F, k = int(rng.integers(20, 400)), int(rng.integers(1, 8)), int(rng.integers(2, 5))
        y = rng.integers(0, k, n)
        y[:k] = np.arange(k)
        X = rng.normal(size=(n, F)) + y[:, None] * rng.uniform(0, 1.5)
        if i % 3 == 0:
            X = np.round(X, 1)
        d = make_dataset(X, y, n_classes=k)
        trees = int(rng.integers(1, 40))
        cfg = TrainConfig(n_iterations=1, evolution_enabled=False, smart_iteration_enabled=False,
                          n_trees=trees, master_seed=i)
        model, _ = train_cascade(d, cfg)
        forest = fit_forest(d, trees, master_seed=i)
        probe = np.r_[X, rng.normal(size=(100, F)) * 2]
        mismatches += int(np.sum(model.predict(probe) != forest.predict(probe)))
    secs = time.perf_counter() - t0
    report(1, mismatches == 0 and secs < 60,
           f"cascade(1 level, no evolution, no smart iteration) == plain forest on 50 datasets; "
           f"{mismatches} mismatching predictions", secs)


# -- 2 ---------------------------------------------------------------------

def _oracle_deviation(f, X, y, n_classes):
    worst = 0.0
    d = make_dataset(X, y, n_classes=n_classes)
    for metric in ("supp", "conf", "f1", "gini", "entropy"):
        expect = oracle.score_all(f.trees, X, y, metric, n_classes)
        table = build_score_table(f, d, metric)
        for t in range(f.n_trees):
            worst = max(worst, float(np.max(np.abs(table.tree_scores(t) - expect[t]))))
        sigma = oracle.sigma_of(expect)
        worst = max(worst, abs(table.sigma - sigma))
        fit = tree_fitness(f, table)
        worst = max(worst, max(abs(fit[t] - v) for t, v in enumerate(oracle.fitness_of(expect))))
        easy = oracle.easy_rows(f.trees, expect, sigma, X)
        if easy_mask(f, table, np.asarray(X, dtype=float)).tolist() != easy:
            worst = math.inf
    return worst


def test_criterion_2_oracle_suite():
    t0 = time.perf_counter()
    worst = _oracle_deviation(hand_forest(), HAND_X, HAND_Y, 2)
    for i in range(40):
        rng = np.random.default_rng(i)
        n = int(rng.integers(3, 11))
        X = rng.integers(0, 4, size=(n, 2)).astype(float)
        k = int(rng.integers(2, 4))
        y = rng.integers(0, k, n)
        f = fit_forest(make_dataset(X, y, n_classes=k), int(rng.integers(1, 3)), master_seed=i)
        worst = max(worst, _oracle_deviation(f, X.tolist(), y.tolist(), k))
    report(2, worst <= ORACLE_TOL,
           f"leaf scores / sigma / partition / fitness vs brute force on 41 fixtures "
           f"(<=10 rows, <=2 trees); max deviation {worst:.2e} (tol {ORACLE_TOL:g})",
           time.perf_counter() - t0)


# -- 3 ---------------------------------------------------------------------

def test_criterion_3_yeast():
    t0 = time.perf_counter()
    d = load_csv(DATA_DIR / "yeast.csv")
    rf, db = paired_runs(lambda s: train_test_split(d, SplitSpec(0.7, True, s)), SEEDS5)
    secs = time.perf_counter() - t0
    ok = db >= rf and abs(float(db) * 100 - YEAST_REF) <= YEAST_TOL and secs < 180
    report(3, ok, f"Yeast 5 seeds: DBRF {float(db):.2%} vs RF {float(rf):.2%}; "
                  f"need DBRF >= RF and within {YEAST_REF}+/-{YEAST_TOL}; runtime < 180s", secs)


# -- 4 ---------------------------------------------------------------------

def test_criterion_4_letter():
    t0 = time.perf_counter()
    d = load_csv(DATA_DIR / "letter.csv")
    rf, db = paired_runs(lambda s: train_test_split(d, SplitSpec(0.8, True, s)), SEEDS5)
    secs = time.perf_counter() - t0
    rf_pct, db_pct = float(rf) * 100, float(db) * 100
    ok = (abs(db_pct - LETTER_REF) <= LETTER_TOL and db_pct >= rf_pct - LETTER_RF_SLACK
          and secs < 900)
    report(4, ok, f"Letter 5 seeds: DBRF {db_pct:.2f}% vs RF {rf_pct:.2f}%; need within "
                  f"{LETTER_REF}+/-{LETTER_TOL} and >= RF-{LETTER_RF_SLACK}; runtime < 900s", secs)


# -- 5 ---------------------------------------------------------------------

def test_criterion_5_adult():
    t0 = time.perf_counter()
    d = load_csv(DATA_DIR / "adult.csv", missing_policy="impute")
    # the first 32561 rows are the standard training file, the rest the test file
    rf, db = paired_runs(lambda s: head_split(d, 32561), SEEDS5)
    secs = time.perf_counter() - t0
    db_pct = float(db) * 100
    ok = abs(db_pct - ADULT_REF) <= ADULT_TOL and secs < 1200
    report(5, ok, f"Adult 5 seeds: DBRF {db_pct:.2f}% (RF {float(rf):.2%}); need within "
                  f"{ADULT_REF}+/-{ADULT_TOL}; runtime < 1200s", secs)


# -- 6 ---------------------------------------------------------------------

def test_criterion_6_iris_two_features():
    t0 = time.perf_counter()
    d = load_csv(DATA_DIR / "iris.csv").select_features([2, 3])
    rf, db = paired_runs(lambda s: train_test_split(d, SplitSpec(0.67, True, s)), range(10))
    model, _ = train_cascade(d, TrainConfig(master_seed=0))
    x, y, pred = decision_grid(model, (0, 1), resolution=200)
    # the grid must be exactly the model's own labelling of those points
    grid_ok = (pred.size == 200 * 200
               and np.array_equal(pred, model.predict(np.c_[x, y]))
               and set(pred.tolist()) <= set(range(d.n_classes)))
    secs = time.perf_counter() - t0
    ok = db >= rf and float(db) * 100 >= IRIS_FLOOR and grid_ok and secs < 60
    report(6, ok, f"Iris features 2,3, 10 seeds: DBRF {float(db):.2%} vs RF {float(rf):.2%}; "
                  f"need DBRF >= RF and >= {IRIS_FLOOR}%; grid {pred.size} points, "
                  f"{len(set(pred.tolist()))} classes, consistent={grid_ok}", secs)


# -- 7 ---------------------------------------------------------------------

def test_criterion_7_imbalance_enrichment():
    t0 = time.perf_counter()
    d = make_blobs(20000, 2, class_weights=(100, 1), separation=2.0, seed=0)
    _, rep = train_cascade(d, TrainConfig(master_seed=0))
    trace = class_balance_trace(rep)
    secs = time.perf_counter() - t0
    ok = trace[-1] < ENRICHED_RATIO and secs < 300
    report(7, ok, f"synthetic 100:1, 20k rows: negative:positive {trace[0]:.2f} -> "
                  f"{trace[-1]:.2f} over {len(trace)} levels; need final < {ENRICHED_RATIO}", secs)


@pytest.mark.skipif(not os.environ.get("DBRF_CREDITCARD_CSV"),
                    reason="set DBRF_CREDITCARD_CSV to run the credit-card reproduction")
def test_criterion_7_credit_card_optional():
    t0 = time.perf_counter()
    d = load_csv(os.environ["DBRF_CREDITCARD_CSV"], label_column="Class")
    tr, te = train_test_split(d, SplitSpec(2 / 3, False, 0))
    model, rep = train_cascade(tr, TrainConfig(master_seed=0))
    auc = auc_roc(model.positive_scores(te.features), te.labels)
    trace = class_balance_trace(rep)
    report("7b", auc >= CREDIT_AUC_FLOOR,
           f"credit card: ratio {trace[0]:.2f} -> {trace[-1]:.2f}, test AUC {auc:.4f} "
           f"(need >= {CREDIT_AUC_FLOOR})", time.perf_counter() - t0)


# -- 8 ---------------------------------------------------------------------

def test_criterion_8_invariant_suites():
    t0 = time.perf_counter()
    path = os.path.join(os.path.dirname(__file__), "test_properties.py")
    code = pytest.main([path, "-q", "-p", "no:cacheprovider"])
    secs = time.perf_counter() - t0
    import test_properties
    report(8, code == 0 and secs < 120,
           f"invariant suites ({test_properties.N_INSTANCES} instances per property) "
           f"exit code {int(code)}; runtime < 120s", secs)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
