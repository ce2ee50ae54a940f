"""Tests for gradient boosting."""

import numpy as np
import pytest

from app.core.errors import ParameterError
from app.core.ml.boosting import GradientBoostingClassifier, softmax


def test_single_label_predicts_that_label():
    X = np.random.default_rng(2).random((40, 4))
    gb = GradientBoostingClassifier(n_stages=5).fit(X, np.full(40, 1))
    assert np.all(gb.predict(X) == 1)


def test_zero_learning_rate_keeps_the_prior():
    """With learning_rate 0 every row gets the majority class of the training set."""
    X = np.random.default_rng(5).random((50, 3))
    y = np.array([0] * 10 + [1] * 15 + [2] * 25)
    gb = GradientBoostingClassifier(n_stages=3, learning_rate=0.0).fit(X, y)
    assert np.all(gb.predict(X) == 2)
    assert np.allclose(gb.scores(X[:1]), [[0.2, 0.3, 0.5]])


def test_training_loss_never_increases(blob_dataset):
    gb = GradientBoostingClassifier(n_stages=10, learning_rate=0.1, max_depth=2).fit(blob_dataset.X, blob_dataset.y)
    losses = np.asarray(gb.train_loss_)
    assert losses.size == 11
    assert np.all(np.diff(losses) <= 1e-12)
    assert losses[-1] < losses[0]


def test_learns_blobs(blob_dataset):
    gb = GradientBoostingClassifier(n_stages=20).fit(blob_dataset.X, blob_dataset.y)
    assert np.mean(gb.predict(blob_dataset.X) == blob_dataset.y) > 0.95


def test_softmax_is_stable():
    P = softmax(np.array([[1000.0, 1000.0, -1000.0]]))
    assert np.allclose(P, [[0.5, 0.5, 0.0]])


def test_state_round_trip_keeps_scores(blob_dataset):
    gb = GradientBoostingClassifier(n_stages=4).fit(blob_dataset.X, blob_dataset.y)
    clone = GradientBoostingClassifier(n_stages=4)
    clone.set_state(gb.get_state())
    assert np.array_equal(clone.decision_function(blob_dataset.X), gb.decision_function(blob_dataset.X))


def test_balanced_weights_even_out_the_prior():
    X = np.random.default_rng(5).random((50, 3))
    y = np.array([0] * 10 + [1] * 15 + [2] * 25)
    gb = GradientBoostingClassifier(n_stages=3, learning_rate=0.0, class_weight="balanced").fit(X, y)
    assert np.allclose(gb.scores(X[:1]), [[1 / 3, 1 / 3, 1 / 3]])


def test_balanced_weights_recover_a_rare_class():
    rng = np.random.default_rng(11)
    X = rng.random((400, 2))
    y = np.zeros(400, dtype=np.int64)
    rare = X[:, 0] > 0.97
    y[rare] = 2
    gb = GradientBoostingClassifier(n_stages=20, max_depth=2, class_weight="balanced").fit(X, y)
    assert np.all(gb.predict(X[rare]) == 2)


def test_rejects_unknown_class_weight_and_bad_rate():
    with pytest.raises(ParameterError):
        GradientBoostingClassifier(class_weight="inverse").fit(np.zeros((4, 1)), np.array([0, 1, 0, 1]))
    with pytest.raises(ParameterError):
        GradientBoostingClassifier(learning_rate=-0.1)
