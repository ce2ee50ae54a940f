"""Shared estimator contract and helpers for the classifiers."""

import abc
from typing import Any, Dict, Optional

import numpy as np

from app.core.errors import ParameterError
from app.core.labels import N_CLASSES


class Estimator(metaclass=abc.ABCMeta):
    """fit/predict over label codes ``0..N_CLASSES-1`` in class order.

    Subclasses take their hyperparameters as keyword arguments, validate
    them in ``__init__`` and keep learned state in attributes ending in
    ``_``. ``get_state``/``set_state`` convert that state to and from plain
    JSON-compatible values.
    """

    kind: str = ""
    n_classes = N_CLASSES

    @abc.abstractmethod
    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "Estimator":
        ...

    @abc.abstractmethod
    def scores(self, X: np.ndarray) -> np.ndarray:
        """Per-class scores, shape (n, N_CLASSES), each row summing to 1."""

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax takes the first maximum: ties resolve in class order
        return np.argmax(self.scores(X), axis=1)

    @abc.abstractmethod
    def get_state(self) -> Dict[str, Any]:
        ...

    @abc.abstractmethod
    def set_state(self, state: Dict[str, Any]) -> None:
        ...


def class_weights(y: np.ndarray, class_weight: Optional[str]) -> np.ndarray:
    """Per-row weights. ``balanced`` weighs class c by n / (classes_present * n_c)."""
    if class_weight is None:
        return np.ones(y.shape[0], dtype=np.float64)
    if class_weight != "balanced":
        raise ParameterError(f"class_weight must be null or 'balanced', got {class_weight!r}")
    counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
    present = np.count_nonzero(counts)
    per_class = np.divide(y.shape[0], present * counts, out=np.zeros_like(counts), where=counts > 0)
    return per_class[y]


class Standardizer:
    """Column-wise (x - mean) / std from training statistics; constant columns keep std 1."""

    def __init__(self, mean: Optional[np.ndarray] = None, std: Optional[np.ndarray] = None):
        self.mean = mean
        self.std = std

    def fit(self, X: np.ndarray) -> "Standardizer":
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Standardizer":
        return cls(np.asarray(data["mean"], dtype=np.float64), np.asarray(data["std"], dtype=np.float64))


def check_positive_int(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ParameterError(f"{name} must be a positive integer, got {value!r}")
    return value


def check_non_negative(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value) or value < 0:
        raise ParameterError(f"{name} must be a finite non-negative number, got {value!r}")
    return float(value)
