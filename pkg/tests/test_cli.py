import csv
import json

import numpy as np
import pytest

from dbrf.cli import main
from dbrf.data import load_csv

from conftest import DATA_DIR

IRIS = str(DATA_DIR / "iris.csv")
FAST = ["--trees", "8", "--iters", "3"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    model = tmp / "m.json"
    assert main(["train", "--data", IRIS, "--model", str(model), *FAST]) == 0
    return tmp, model


def test_train_outputs(trained):
    tmp, model = trained
    report = rows(tmp / "m.json.report.csv")
    doc = json.loads(model.read_text())
    assert len(report) == len(doc["levels"]) <= 3
    man = json.loads((tmp / "m.json.manifest.json").read_text())
    assert man["command"] == "train"
    assert man["config"]["hem_metric"] == "f1"
    assert man["config"]["n_trees"] == 8
    assert IRIS in man["inputs"] and len(man["inputs"][IRIS]) == 64
    assert all(v >= 0 for v in man["timings"].values())


def test_single_plain_level(tmp_path):
    m = tmp_path / "m.json"
    code = main(["train", "--data", IRIS, "--model", str(m), "--iters", "1", "--no-evolution",
                 "--no-smart-iter", "--trees", "5", "--report", str(tmp_path / "r.csv")])
    assert code == 0
    assert len(rows(tmp_path / "r.csv")) == 1


def test_predict_and_evaluate(trained, tmp_path):
    _, model = trained
    out = tmp_path / "p.csv"
    assert main(["predict", "--model", str(model), "--data", IRIS, "--out", str(out)]) == 0
    got = rows(out)
    assert len(got) == 150
    assert list(got[0]) == ["row_id", "predicted", "level_used"]
    n_levels = len(json.loads(model.read_text())["levels"])
    assert {int(r["level_used"]) for r in got} <= set(range(1, n_levels + 1))
    truth = load_csv(IRIS)
    names = truth.schema.class_names
    acc = np.mean([names[y] == r["predicted"] for y, r in zip(truth.labels, got)])
    ev = tmp_path / "e.csv"
    assert main(["evaluate", "--model", str(model), "--data", IRIS, "--out", str(ev)]) == 0
    metrics = {r["metric"]: r["value"] for r in rows(ev)}
    assert float(metrics["accuracy"]) == pytest.approx(acc)


def test_predict_binary_has_scores(tmp_path):
    data = tmp_path / "b.csv"
    rng = np.random.default_rng(0)
    with open(data, "w") as fh:
        fh.write("a,b,label\n")
        for _ in range(80):
            a, b = rng.normal(size=2)
            fh.write(f"{a},{b},{'pos' if a + b > 0 else 'neg'}\n")
    m = tmp_path / "m.json"
    assert main(["train", "--data", str(data), "--model", str(m), *FAST]) == 0
    out = tmp_path / "p.csv"
    assert main(["predict", "--model", str(m), "--data", str(data), "--out", str(out)]) == 0
    got = rows(out)
    assert "positive_score" in got[0]
    assert all(0.0 <= float(r["positive_score"]) <= 1.0 for r in got)
    ev = tmp_path / "e.csv"
    assert main(["evaluate", "--model", str(m), "--data", str(data), "--out", str(ev)]) == 0
    assert "auc" in {r["metric"] for r in rows(ev)}


def test_predict_schema_mismatch_names_column(trained, tmp_path, capsys):
    _, model = trained
    bad = tmp_path / "bad.csv"
    bad.write_text("sepal_length,sepal_width,petal_length,species\n1,2,3,Iris-setosa\n")
    code = main(["predict", "--model", str(model), "--data", str(bad), "--out",
                 str(tmp_path / "p.csv")])
    assert code == 2
    assert "petal_width" in capsys.readouterr().err


def test_grid(trained, tmp_path):
    tmp, _ = trained
    m = tmp_path / "m2.json"
    assert main(["train", "--data", IRIS, "--model", str(m), "--use-features", "2,3", *FAST]) == 0
    out = tmp_path / "g.csv"
    assert main(["grid", "--model", str(m), "--features", "0,1", "--resolution", "2",
                 "--out", str(out)]) == 0
    assert len(rows(out)) == 4
    assert main(["grid", "--model", str(m), "--features", "0,1", "--resolution", "3",
                 "--bounds", "0,1,0,1", "--out", str(out)]) == 0
    g = rows(out)
    assert [float(r["x"]) for r in g[:3]] == [0.0, 0.5, 1.0]


def test_grid_single_class_model_is_uniform(tmp_path):
    from dbrf.cascade import TrainConfig, train_cascade
    from dbrf.persist import save_model
    data = tmp_path / "d.csv"
    data.write_text("a,b,label\n" + "".join(f"{i},{i % 3},x\n" for i in range(20)) + "0,0,y\n")
    d = load_csv(data)
    only_x = d.take(np.flatnonzero(d.labels == 0))   # schema knows "y", the rows do not
    model, _ = train_cascade(only_x, TrainConfig(n_trees=4, n_iterations=2))
    m = tmp_path / "m.json"
    save_model(model, m)
    out = tmp_path / "g.csv"
    assert main(["grid", "--model", str(m), "--features", "0,1", "--resolution", "5",
                 "--out", str(out)]) == 0
    assert {r["predicted"] for r in rows(out)} == {"x"}


def test_benchmark_is_deterministic(tmp_path):
    args = ["benchmark", "--data", IRIS, "--seeds", "2", "--trees", "6", "--iters", "2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a), "--runs-out", str(tmp_path / "runs.csv")]) == 0
    assert main(args + ["--out", str(b)]) == 0
    ra, rb = rows(a), rows(b)
    assert [r["method"] for r in ra] == ["rf", "dbrf"]
    assert list(ra[0])[:6] == ["method", "n_runs", "accuracy_mean", "accuracy_std", "auc_mean",
                               "auc_std"]
    for x, y in zip(ra, rb):
        for col in ("method", "n_runs", "accuracy_mean", "accuracy_std"):
            assert x[col] == y[col]
    assert len(rows(tmp_path / "runs.csv")) == 4


@pytest.mark.parametrize("argv, code", [
    ([], 1),
    (["train", "--data", IRIS], 1),
    (["train", "--data", IRIS, "--model", "m.json", "--trees", "0"], 1),
    (["train", "--data", IRIS, "--model", "m.json", "--metric", "lift"], 1),
    (["train", "--data", "/nope.csv", "--model", "m.json"], 2),
    (["benchmark", "--data", IRIS, "--out", "t.csv", "--baselines", "svm"], 1),
    (["predict", "--model", "/nope.json", "--data", IRIS, "--out", "p.csv"], 2),
])
def test_exit_codes(argv, code, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code
    assert capsys.readouterr().err


def test_internal_error_exit_code(monkeypatch, tmp_path):
    from dbrf import cli

    def boom(args):
        raise AssertionError("invariant broken")
    monkeypatch.setitem(cli.COMMANDS, "train", boom)
    assert main(["train", "--data", IRIS, "--model", str(tmp_path / "m")]) == 3
