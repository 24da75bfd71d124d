import numpy as np
import pytest

from dbrf.bench import (RunResult, decision_grid, grid_bounds, pass_rates, run_benchmark,
                        summarize)
from dbrf.cascade import TrainConfig, train_cascade
from dbrf.data import SplitSpec, load_csv, make_blobs, train_test_split

from conftest import DATA_DIR


def test_pass_rates():
    assert pass_rates(np.array([1, 1, 2, 3]), 3) == (0.5, 0.25, 0.25)
    assert pass_rates(np.array([2, 2]), 3) == (0.0, 1.0, 0.0)


def test_summarize_mean_std():
    rs = [RunResult("rf", 0, s, acc, None, 1.0, 0.1) for s, acc in enumerate([0.5, 0.7])]
    rs.append(RunResult("dbrf", 0, 0, 0.9, 0.8, 2.0, 0.2, 2, (0.5, 0.5)))
    rows = summarize(rs)
    assert [r["method"] for r in rows] == ["rf", "dbrf"]
    assert rows[0]["accuracy_mean"] == pytest.approx(0.6)
    assert rows[0]["accuracy_std"] == pytest.approx(np.std([0.5, 0.7], ddof=1))
    assert rows[0]["auc_mean"] is None
    assert rows[1]["accuracy_std"] == 0.0 and rows[1]["auc_mean"] == 0.8


def test_run_benchmark_pairs_methods():
    d = make_blobs(300, 2, (0.7, 0.3), separation=1.5, seed=0)
    split = lambda j: train_test_split(d, SplitSpec(0.67, True, j))
    res = run_benchmark(split, 2, [0, 1], TrainConfig(n_trees=5, n_iterations=2))
    assert [(r.method, r.split, r.seed) for r in res] == [
        (m, j, s) for j in range(2) for s in range(2) for m in ("rf", "dbrf")]
    assert all(r.auc is not None and 0 <= r.auc <= 1 for r in res)
    dbrf = [r for r in res if r.method == "dbrf"]
    assert all(abs(sum(r.test_pass_rates) - 1) < 1e-12 for r in dbrf)
    with pytest.raises(ValueError):
        run_benchmark(split, 1, [0], baselines=("svm",))


def test_grid_covers_model_classes():
    d = load_csv(DATA_DIR / "iris.csv").select_features([2, 3])
    model, _ = train_cascade(d, TrainConfig(n_trees=10, n_iterations=2))
    x, y, pred = decision_grid(model, (0, 1), resolution=40)
    assert x.shape == y.shape == pred.shape == (1600,)
    assert set(pred.tolist()) == {0, 1, 2}
    lo, hi = grid_bounds(model, 0)
    span = d.features[:, 0].max() - d.features[:, 0].min()
    assert lo == pytest.approx(d.features[:, 0].min() - 0.05 * span)
    assert hi == pytest.approx(d.features[:, 0].max() + 0.05 * span)
    np.testing.assert_array_equal(pred, model.predict(np.c_[x, y]))
    with pytest.raises(ValueError):
        decision_grid(model, (0, 2))
