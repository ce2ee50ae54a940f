"""Tests for the k-nearest-neighbour classifier."""

import numpy as np
import pytest

from app.core.errors import ParameterError
from app.core.ml.knn import KNeighborsClassifier


def brute_force(X, y, Q, k):
    """Reference ranking by (squared distance, row index) with nearest-voter tie breaking."""
    preds, neighbours = [], []
    for q in Q:
        d = ((X - q) ** 2).sum(axis=1)
        order = sorted(range(len(X)), key=lambda i: (d[i], i))[:k]
        tally = np.bincount(y[order], minlength=3)
        winners = set(np.flatnonzero(tally == tally.max()))
        preds.append(next(y[i] for i in order if y[i] in winners))
        neighbours.append(order)
    return np.array(preds), np.array(neighbours)


def test_k1_returns_training_label(blob_dataset):
    knn = KNeighborsClassifier(k=1).fit(blob_dataset.X, blob_dataset.y)
    assert np.array_equal(knn.predict(blob_dataset.X), blob_dataset.y)


def test_matches_exhaustive_search():
    """Integer grid coordinates force many distance ties."""
    rng = np.random.default_rng(31)
    X = rng.integers(0, 5, size=(200, 3)).astype(np.float64)
    y = rng.integers(0, 3, size=200)
    Q = rng.integers(0, 5, size=(50, 3)).astype(np.float64)
    for k in (1, 4, 7):
        knn = KNeighborsClassifier(k=k, scale=False).fit(X, y)
        expected_pred, expected_idx = brute_force(X, y, Q, k)
        assert np.array_equal(knn.kneighbors(Q), expected_idx)
        assert np.array_equal(knn.predict(Q), expected_pred)


def test_tied_vote_goes_to_nearest_neighbour():
    """k=2: a wDrop neighbour at distance 1 beats a qDrop neighbour at distance 2."""
    X = np.array([[2.0], [1.0]])
    y = np.array([0, 1])
    knn = KNeighborsClassifier(k=2, scale=False).fit(X, y)
    assert knn.predict(np.array([[0.0]])).tolist() == [1]
    assert np.allclose(knn.scores(np.array([[0.0]])), [[0.5, 0.5, 0.0]])


def test_manhattan_metric():
    X = np.array([[1.0, 1.0], [1.8, 0.0]])
    y = np.array([0, 1])
    origin = np.array([[0.0, 0.0]])
    assert KNeighborsClassifier(k=1, metric="manhattan", scale=False).fit(X, y).predict(origin).tolist() == [1]
    assert KNeighborsClassifier(k=1, metric="euclidean", scale=False).fit(X, y).predict(origin).tolist() == [0]


def test_k_larger_than_training_set():
    with pytest.raises(ParameterError, match="exceeds"):
        KNeighborsClassifier(k=10).fit(np.zeros((5, 2)), np.zeros(5, dtype=np.int64))
    with pytest.raises(ParameterError):
        KNeighborsClassifier(metric="cosine")
