import numpy as np
import pytest

from dbrf.forest import Forest, derive_seed, fit_forest, predict_forest, route_all

import _oracles as oracle
from conftest import make_dataset


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(400, 5))
    y = (X[:, 0] * X[:, 1] > 0).astype(int) + (X[:, 2] > 1)
    return make_dataset(X, y, n_classes=3)


def test_thread_count_does_not_change_trees(data):
    a = fit_forest(data, 12, master_seed=3, n_jobs=1)
    b = fit_forest(data, 12, master_seed=3, n_jobs=4)
    assert a.tree_seeds == b.tree_seeds
    for s, t in zip(a.trees, b.trees):
        assert s.threshold.tobytes() == t.threshold.tobytes()
        assert s.leaf_counts.tobytes() == t.leaf_counts.tobytes()


def test_env_thread_cap(data, monkeypatch):
    monkeypatch.setenv("DBRF_THREADS", "2")
    a = fit_forest(data, 6, master_seed=1)
    monkeypatch.setenv("DBRF_THREADS", "1")
    b = fit_forest(data, 6, master_seed=1)
    np.testing.assert_array_equal(a.apply(data.features), b.apply(data.features))


def test_votes_match_per_tree_oracle(data):
    f = fit_forest(data, 9, master_seed=2)
    leaves = route_all(f, data)
    votes = f.votes(data.features)
    assert votes.shape == (400, 3)
    np.testing.assert_array_equal(votes.sum(axis=1), 9)
    for r in range(0, 400, 37):
        x = data.features[r]
        expect = np.zeros(3, dtype=int)
        for t, tree in enumerate(f.trees):
            leaf = oracle.walk(tree, x)
            assert leaves[r, t] == leaf
            expect[oracle.predicted_class(tree, leaf)] += 1
        np.testing.assert_array_equal(votes[r], expect)
        assert predict_forest(f, x) == int(np.argmax(expect))


def test_bootstrap_rows_are_seeded(data):
    f = fit_forest(data, 3, master_seed=9)
    for tree, seed in zip(f.trees, f.tree_seeds):
        rows = np.random.default_rng(seed).integers(0, len(data), len(data))
        expect = np.bincount(data.labels[rows], minlength=3)
        np.testing.assert_array_equal(tree.leaf_counts.sum(axis=0), expect)


def test_no_bootstrap_uses_all_rows(data):
    f = fit_forest(data, 2, bootstrap=False)
    np.testing.assert_array_equal(f.trees[0].leaf_counts.sum(axis=0), data.class_counts())


def test_subset_and_width_check(data):
    f = fit_forest(data, 5)
    g = f.subset([4, 0])
    assert g.n_trees == 2 and g.tree_seeds == [f.tree_seeds[4], f.tree_seeds[0]]
    np.testing.assert_array_equal(g.apply(data.features)[:, 0], f.apply(data.features)[:, 4])
    with pytest.raises(ValueError, match="features"):
        f.apply(np.zeros((2, 4)))


def test_bad_arguments(data):
    with pytest.raises(ValueError):
        fit_forest(data, 0)
    with pytest.raises(ValueError):
        fit_forest(data, 2, criterion="mse")
    with pytest.raises(ValueError):
        fit_forest(data, 2, feature_subsample=6)
    with pytest.raises(ValueError):
        Forest([], [], 2)


def test_derive_seed_is_stable():
    assert derive_seed(0, 1) == derive_seed(0, 1)
    assert derive_seed(0, 1) != derive_seed(1, 0)
    assert 0 <= derive_seed(2**40, 3) < 2**64
