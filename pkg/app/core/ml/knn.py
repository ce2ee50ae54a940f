"""Brute-force k-nearest-neighbour classifier.

Neighbours are ranked by (distance, training row index). Votes are tallied
per class; when several classes tie, the one whose nearest voter ranks
first wins.
"""

from typing import Any, Dict, Optional

import numpy as np

from app.core.errors import ParameterError
from app.core.ml.base import Estimator, Standardizer, check_positive_int, class_weights

METRICS = ("euclidean", "manhattan")
CHUNK_ELEMENTS = 4_000_000


def pairwise_distances(Q: np.ndarray, X: np.ndarray, metric: str) -> np.ndarray:
    """Distances from each query row to every stored row (squared for euclidean)."""
    diff = Q[:, None, :] - X[None, :, :]
    if metric == "manhattan":
        return np.abs(diff).sum(axis=2)
    return (diff * diff).sum(axis=2)


def nearest(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries, ordered by (distance, index)."""
    if k >= dist.shape[0]:
        return np.argsort(dist, kind="stable")[:k]
    part = np.argpartition(dist, k - 1)[:k]
    cutoff = dist[part].max()
    candidates = np.flatnonzero(dist <= cutoff)
    order = np.lexsort((candidates, dist[candidates]))
    return candidates[order[:k]]


class KNeighborsClassifier(Estimator):
    kind = "knn"

    def __init__(
        self,
        k: int = 5,
        metric: str = "euclidean",
        scale: bool = True,
        class_weight: Optional[str] = None,
    ):
        check_positive_int("k", k)
        if metric not in METRICS:
            raise ParameterError(f"unknown distance metric '{metric}' (expected one of {', '.join(METRICS)})")
        self.k = k
        self.metric = metric
        self.scale = bool(scale)
        self.class_weight = class_weight
        self.scaler_: Optional[Standardizer] = None
        self.X_: Optional[np.ndarray] = None
        self.y_: Optional[np.ndarray] = None
        self.vote_weights_: Optional[np.ndarray] = None

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "KNeighborsClassifier":
        if self.k > X.shape[0]:
            raise ParameterError(f"k={self.k} exceeds the {X.shape[0]} training rows")
        self.scaler_ = Standardizer().fit(X) if self.scale else None
        self.X_ = self._prepare(X)
        self.y_ = np.asarray(y, dtype=np.int64)
        self.vote_weights_ = class_weights(self.y_, self.class_weight)
        return self

    def _prepare(self, X: np.ndarray) -> np.ndarray:
        return self.scaler_.transform(X) if self.scaler_ is not None else np.asarray(X, dtype=np.float64)

    def kneighbors(self, X: np.ndarray) -> np.ndarray:
        """Neighbour row indices, shape (n_queries, k), nearest first."""
        Q = self._prepare(X)
        out = np.empty((Q.shape[0], self.k), dtype=np.int64)
        chunk = max(1, CHUNK_ELEMENTS // max(1, self.X_.size))
        for start in range(0, Q.shape[0], chunk):
            dist = pairwise_distances(Q[start:start + chunk], self.X_, self.metric)
            for offset, row in enumerate(dist):
                out[start + offset] = nearest(row, self.k)
        return out

    def _tally(self, neighbours: np.ndarray) -> np.ndarray:
        tally = np.zeros((neighbours.shape[0], self.n_classes), dtype=np.float64)
        for j in range(self.k):
            idx = neighbours[:, j]
            np.add.at(tally, (np.arange(neighbours.shape[0]), self.y_[idx]), self.vote_weights_[idx])
        return tally

    def scores(self, X: np.ndarray) -> np.ndarray:
        tally = self._tally(self.kneighbors(X))
        return tally / tally.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> np.ndarray:
        neighbours = self.kneighbors(X)
        tally = self._tally(neighbours)
        best = tally.max(axis=1, keepdims=True)
        winners = tally == best
        labels = self.y_[neighbours]
        out = np.empty(neighbours.shape[0], dtype=np.int64)
        for i in range(neighbours.shape[0]):
            # first neighbour (nearest) whose label is among the tied winners
            out[i] = next(label for label in labels[i] if winners[i, label])
        return out

    def get_state(self) -> Dict[str, Any]:
        return {
            "scaler": self.scaler_.to_dict() if self.scaler_ is not None else None,
            "X": self.X_.tolist(),
            "y": self.y_.tolist(),
            "vote_weights": self.vote_weights_.tolist(),
        }

    def set_state(self, state: Dict[str, Any]) -> None:
        self.scaler_ = Standardizer.from_dict(state["scaler"]) if state.get("scaler") else None
        self.X_ = np.asarray(state["X"], dtype=np.float64)
        self.y_ = np.asarray(state["y"], dtype=np.int64)
        self.vote_weights_ = np.asarray(state["vote_weights"], dtype=np.float64)
