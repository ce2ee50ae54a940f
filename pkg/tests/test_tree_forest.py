"""Tests for the tree builder, decision tree and random forest."""

import numpy as np
import pytest

from app.core.errors import ParameterError
from app.core.ml.forest import DecisionTreeClassifier, RandomForestClassifier
from app.core.ml.model import make_estimator
from app.core.ml.tree import LEAF, resolve_max_features


def xor_points(reps=25):
    corners = np.array([[-1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [1.0, -1.0]])
    X = np.repeat(corners, reps, axis=0)
    y = (X[:, 0] != X[:, 1]).astype(np.int64)
    return X, y


def accuracy_of(estimator, X, y):
    return float(np.mean(estimator.predict(X) == y))


def test_separable_toy_is_learned_exactly():
    X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0], [20.0], [21.0]])
    y = np.array([0, 0, 0, 1, 1, 1, 2, 2])
    tree = DecisionTreeClassifier().fit(X, y)
    assert np.array_equal(tree.predict(X), y)
    assert tree.tree_.depth == 2


def test_xor_needs_depth_two():
    """Depth 1 cannot beat chance on XOR; unlimited depth fits it."""
    X, y = xor_points()
    assert accuracy_of(DecisionTreeClassifier(max_depth=1).fit(X, y), X, y) == 0.5
    assert accuracy_of(DecisionTreeClassifier().fit(X, y), X, y) == 1.0


def test_single_label_gives_one_leaf():
    X = np.random.default_rng(0).random((30, 3))
    tree = DecisionTreeClassifier().fit(X, np.full(30, 2))
    assert tree.tree_.n_nodes == 1
    assert tree.tree_.feature[0] == LEAF
    assert np.all(tree.predict(X) == 2)


def test_equal_gain_splits_take_the_first_position():
    """Cuts at 0|1 and 1|3 score the same; the lower one wins, at the midpoint."""
    X = np.array([[0.0], [1.0], [1.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    tree = DecisionTreeClassifier(max_depth=1).fit(X, y).tree_
    assert tree.threshold[0] == 0.5


def test_min_samples_leaf_respected():
    X = np.arange(20, dtype=np.float64).reshape(-1, 1)
    y = np.array([0] * 2 + [1] * 18)
    tree = DecisionTreeClassifier(min_samples_leaf=5).fit(X, y).tree_
    leaves = tree.apply(X)
    assert np.bincount(leaves)[np.unique(leaves)].min() >= 5


def test_one_tree_forest_equals_decision_tree():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(1000, 6))
    y = (X[:, 0] + 0.5 * X[:, 3] > 0).astype(np.int64) + (X[:, 2] > 1.0)
    dt = DecisionTreeClassifier(max_depth=8).fit(X, y)
    rf = RandomForestClassifier(n_trees=1, max_depth=8, bootstrap=False, max_features="all").fit(X, y, seed=99)
    for name in ("feature", "threshold", "left", "right", "value"):
        assert np.array_equal(getattr(dt.tree_, name), getattr(rf.trees_[0], name))
    queries = rng.normal(size=(500, 6))
    assert np.array_equal(dt.predict(queries), rf.predict(queries))


def test_max_features_resolution():
    assert resolve_max_features("sqrt", 6) == 2
    assert resolve_max_features("log2", 6) == 2
    assert resolve_max_features(0.5, 6) == 3
    assert resolve_max_features("all", 6) == 6
    with pytest.raises(ParameterError):
        resolve_max_features(7, 6)
    with pytest.raises(ParameterError):
        RandomForestClassifier(n_trees=3, max_features=7).fit(np.zeros((10, 6)), np.zeros(10, dtype=np.int64))


def test_invalid_tree_params():
    with pytest.raises(ParameterError):
        make_estimator("decision_tree", {"max_depth": 0})
    with pytest.raises(ParameterError):
        make_estimator("random_forest", {"n_trees": 0})
    with pytest.raises(ParameterError):
        make_estimator("dt", {"criterion": "squared_error"})
    with pytest.raises(ParameterError):
        make_estimator("rf", {"depth": 3})


def test_forest_on_xor():
    X, y = xor_points(50)
    rf = RandomForestClassifier(n_trees=25, max_depth=2, max_features="all").fit(X, y, seed=4)
    assert accuracy_of(rf, X, y) >= 0.5
    assert np.allclose(rf.scores(X).sum(axis=1), 1.0)


def test_forest_seed_controls_bootstrap(blob_dataset):
    X, y = blob_dataset.X, blob_dataset.y
    a = RandomForestClassifier(n_trees=5, max_depth=3).fit(X, y, seed=1)
    b = RandomForestClassifier(n_trees=5, max_depth=3).fit(X, y, seed=1)
    assert all(np.array_equal(s.threshold, t.threshold) for s, t in zip(a.trees_, b.trees_))
    assert np.array_equal(a.votes(X), b.votes(X))


def test_balanced_class_weight_lifts_minority(blob_dataset):
    X, y = blob_dataset.X, blob_dataset.y
    keep = np.concatenate([np.flatnonzero(y == 0)[:6], np.flatnonzero(y != 0)])
    tree = DecisionTreeClassifier(max_depth=1, class_weight="balanced").fit(X[keep], y[keep])
    assert tree.tree_.value[0].sum() == pytest.approx(keep.size)
    with pytest.raises(ParameterError):
        DecisionTreeClassifier(class_weight="inverse").fit(X, y)
