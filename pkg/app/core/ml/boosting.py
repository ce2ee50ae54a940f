"""
Multiclass gradient boosting with softmax loss.

Scores start at the log class priors. Each stage fits one regression tree
per class to the residuals ``onehot - softmax(F)`` and sets leaf values with
a one-step Newton estimate; scores move by ``learning_rate`` times the leaf
value. With ``class_weight="balanced"`` the priors, the tree splits, the
Newton sums and the recorded training loss all use the per-row weights.
"""

from typing import Any, Dict, List, Optional

import numpy as np

from app.core.ml.base import Estimator, check_non_negative, check_positive_int, class_weights
from app.core.ml.tree import Tree, check_tree_params, fit_regression_tree

PRIOR_FLOOR = 1e-12
NEWTON_EPS = 1e-12


def softmax(F: np.ndarray) -> np.ndarray:
    Z = F - F.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def log_loss(P: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    losses = -np.log(np.maximum(P[np.arange(y.shape[0]), y], 1e-300))
    if weights is None:
        return float(np.mean(losses))
    return float(np.sum(weights * losses) / np.sum(weights))


class GradientBoostingClassifier(Estimator):
    kind = "gradient_boosting"

    def __init__(
        self,
        n_stages: int = 50,
        learning_rate: float = 0.1,
        max_depth: Optional[int] = 3,
        min_samples_leaf: int = 1,
        class_weight: Optional[str] = None,
    ):
        check_positive_int("n_stages", n_stages)
        check_non_negative("learning_rate", learning_rate)
        check_tree_params(max_depth, min_samples_leaf)
        self.n_stages = n_stages
        self.learning_rate = float(learning_rate)
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.class_weight = class_weight
        self.init_: Optional[np.ndarray] = None
        self.stages_: List[List[Tree]] = []
        self.train_loss_: List[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "GradientBoostingClassifier":
        n = X.shape[0]
        K = self.n_classes
        w = class_weights(y, self.class_weight)
        Y = np.zeros((n, K), dtype=np.float64)
        Y[np.arange(n), y] = 1.0
        prior = (Y * w[:, None]).sum(axis=0) / w.sum()
        self.init_ = np.log(np.maximum(prior, PRIOR_FLOOR))
        F = np.tile(self.init_, (n, 1))
        self.stages_ = []
        self.train_loss_ = [log_loss(softmax(F), y, w)]
        for _ in range(self.n_stages):
            P = softmax(F)
            stage = []
            for k in range(K):
                residual = Y[:, k] - P[:, k]
                tree = fit_regression_tree(
                    X, residual, weights=w, max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf
                )
                leaves = tree.apply(X)
                num = np.bincount(leaves, weights=w * residual, minlength=tree.n_nodes)
                den = np.bincount(
                    leaves, weights=w * np.abs(residual) * (1.0 - np.abs(residual)), minlength=tree.n_nodes
                )
                gamma = (K - 1) / K * np.divide(num, den, out=np.zeros_like(num), where=den > NEWTON_EPS)
                tree.value = gamma.reshape(-1, 1)
                F[:, k] += self.learning_rate * gamma[leaves]
                stage.append(tree)
            self.stages_.append(stage)
            self.train_loss_.append(log_loss(softmax(F), y, w))
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        F = np.tile(self.init_, (X.shape[0], 1))
        for stage in self.stages_:
            for k, tree in enumerate(stage):
                F[:, k] += self.learning_rate * tree.predict_value(X)
        return F

    def scores(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def get_state(self) -> Dict[str, Any]:
        return {
            "init": self.init_.tolist(),
            "stages": [[tree.to_dict() for tree in stage] for stage in self.stages_],
            "train_loss": list(self.train_loss_),
        }

    def set_state(self, state: Dict[str, Any]) -> None:
        self.init_ = np.asarray(state["init"], dtype=np.float64)
        self.stages_ = [[Tree.from_dict(tree) for tree in stage] for stage in state["stages"]]
        self.train_loss_ = list(state.get("train_loss", []))
