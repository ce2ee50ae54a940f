"""Multinomial logistic regression trained by full-batch gradient descent."""

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.core.errors import DivergenceError
from app.core.ml.base import Estimator, Standardizer, check_non_negative, check_positive_int, class_weights
from app.core.ml.boosting import softmax


def loss_and_gradient(
    W: np.ndarray,
    b: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    weights: np.ndarray,
    l2: float,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Weighted mean cross-entropy plus ``l2/2 * ||W||^2`` (bias unregularized), and its gradient."""
    Z = X @ W + b
    Z = Z - Z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(Z).sum(axis=1, keepdims=True))
    log_p = Z - log_norm
    total = weights.sum()
    loss = -np.sum(weights[:, None] * Y * log_p) / total + 0.5 * l2 * np.sum(W * W)
    R = (np.exp(log_p) - Y) * (weights / total)[:, None]
    return float(loss), X.T @ R + l2 * W, R.sum(axis=0)


class LogisticRegressionClassifier(Estimator):
    kind = "logistic_regression"

    def __init__(
        self,
        learning_rate: float = 0.1,
        iterations: int = 1000,
        l2: float = 0.0,
        class_weight: Optional[str] = None,
    ):
        check_non_negative("learning_rate", learning_rate)
        check_positive_int("iterations", iterations)
        check_non_negative("l2", l2)
        self.learning_rate = float(learning_rate)
        self.iterations = iterations
        self.l2 = float(l2)
        self.class_weight = class_weight
        self.scaler_: Optional[Standardizer] = None
        self.W_: Optional[np.ndarray] = None
        self.b_: Optional[np.ndarray] = None
        self.loss_history_: List[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "LogisticRegressionClassifier":
        self.scaler_ = Standardizer().fit(X)
        Xs = self.scaler_.transform(X)
        n, d = Xs.shape
        Y = np.zeros((n, self.n_classes), dtype=np.float64)
        Y[np.arange(n), y] = 1.0
        weights = class_weights(y, self.class_weight)
        W = np.zeros((d, self.n_classes), dtype=np.float64)
        b = np.zeros(self.n_classes, dtype=np.float64)
        history = []
        with np.errstate(over="ignore", invalid="ignore"):
            for iteration in range(1, self.iterations + 1):
                loss, gW, gb = loss_and_gradient(W, b, Xs, Y, weights, self.l2)
                if not np.isfinite(loss):
                    raise DivergenceError(iteration, loss)
                history.append(loss)
                W = W - self.learning_rate * gW
                b = b - self.learning_rate * gb
            loss, _, _ = loss_and_gradient(W, b, Xs, Y, weights, self.l2)
            if not np.isfinite(loss):
                raise DivergenceError(self.iterations + 1, loss)
        history.append(loss)
        self.W_, self.b_, self.loss_history_ = W, b, history
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.scaler_.transform(X) @ self.W_ + self.b_

    def scores(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.decision_function(X))

    def get_state(self) -> Dict[str, Any]:
        return {
            "scaler": self.scaler_.to_dict(),
            "W": self.W_.tolist(),
            "b": self.b_.tolist(),
            "loss_history": self.loss_history_[-1:],
        }

    def set_state(self, state: Dict[str, Any]) -> None:
        self.scaler_ = Standardizer.from_dict(state["scaler"])
        self.W_ = np.asarray(state["W"], dtype=np.float64).reshape(len(self.scaler_.mean), self.n_classes)
        self.b_ = np.asarray(state["b"], dtype=np.float64)
        self.loss_history_ = list(state.get("loss_history", []))
