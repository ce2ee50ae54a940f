"""Decision tree and random forest classifiers."""

from typing import Any, Dict, List, Optional, Union

import numpy as np

from app.core.errors import ParameterError
from app.core.ml.base import Estimator, check_positive_int, class_weights
from app.core.ml.tree import Tree, TreeBuilder, check_tree_params, resolve_max_features


class DecisionTreeClassifier(Estimator):
    kind = "decision_tree"

    def __init__(
        self,
        max_depth: Optional[int] = None,
        min_samples_leaf: int = 1,
        criterion: str = "gini",
        class_weight: Optional[str] = None,
    ):
        check_tree_params(max_depth, min_samples_leaf, criterion)
        if criterion == "squared_error":
            raise ParameterError("decision tree classifiers split on 'gini' or 'entropy'")
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.criterion = criterion
        self.class_weight = class_weight
        self.tree_: Optional[Tree] = None

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "DecisionTreeClassifier":
        builder = TreeBuilder(
            criterion=self.criterion,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            max_features=X.shape[1],
            n_classes=self.n_classes,
        )
        self.tree_ = builder.build(X, y, class_weights(y, self.class_weight))
        return self

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.tree_.class_distribution(X)

    def get_state(self) -> Dict[str, Any]:
        return {"tree": self.tree_.to_dict()}

    def set_state(self, state: Dict[str, Any]) -> None:
        self.tree_ = Tree.from_dict(state["tree"])


class RandomForestClassifier(Estimator):
    """Bagged trees with per-node feature subsampling; prediction is the majority vote.

    Tree ``i`` draws from its own stream spawned from the fit seed. With
    ``bootstrap=False`` and all features per split no draws are made, so a
    one-tree forest equals a decision tree with the same parameters.
    """

    kind = "random_forest"

    def __init__(
        self,
        n_trees: int = 50,
        max_depth: Optional[int] = None,
        min_samples_leaf: int = 1,
        max_features: Union[str, int, float, None] = "sqrt",
        bootstrap: bool = True,
        criterion: str = "gini",
        class_weight: Optional[str] = None,
    ):
        check_positive_int("n_trees", n_trees)
        check_tree_params(max_depth, min_samples_leaf, criterion)
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bool(bootstrap)
        self.criterion = criterion
        self.class_weight = class_weight
        self.trees_: List[Tree] = []

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "RandomForestClassifier":
        n, d = X.shape
        m = resolve_max_features(self.max_features, d)
        base_weights = class_weights(y, self.class_weight)
        self.trees_ = []
        for child in np.random.SeedSequence(seed).spawn(self.n_trees):
            rng = np.random.Generator(np.random.PCG64(child))
            weights = base_weights
            if self.bootstrap:
                counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
                weights = base_weights * counts
            builder = TreeBuilder(
                criterion=self.criterion,
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                max_features=m,
                n_classes=self.n_classes,
                rng=rng,
            )
            self.trees_.append(builder.build(X, y, weights))
        return self

    def votes(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees_:
            votes[rows, tree.predict_class(X)] += 1
        return votes

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.votes(X) / len(self.trees_)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.votes(X), axis=1)

    def get_state(self) -> Dict[str, Any]:
        return {"trees": [tree.to_dict() for tree in self.trees_]}

    def set_state(self, state: Dict[str, Any]) -> None:
        self.trees_ = [Tree.from_dict(tree) for tree in state["trees"]]
