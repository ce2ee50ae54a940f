"""
Binary axis-aligned decision trees, built with numpy.

One builder serves classification (Gini or entropy over weighted class
counts) and regression (weighted squared error, used by gradient boosting).
Rows go left when ``x <= threshold``; thresholds sit halfway between two
adjacent distinct values of the node's rows.

Split ties resolve to the first candidate feature, then the first position
in sorted order. A node that is impure takes its best split even when the
split does not reduce impurity, so patterns like XOR remain learnable one
level deeper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from app.core.errors import ParameterError

LEAF = -1


@dataclass
class Tree:
    """Flat node arrays. ``value`` holds class weight sums (classification) or the leaf output (regression)."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def class_distribution(self, X: np.ndarray) -> np.ndarray:
        counts = self.value[self.apply(X)]
        totals = counts.sum(axis=1, keepdims=True)
        return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)

    def predict_class(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.value[self.apply(X)], axis=1)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X), 0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Tree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=np.float64).reshape(len(data["feature"]), -1),
        )


def resolve_max_features(max_features: Union[str, int, float, None], n_features: int) -> int:
    """Number of candidate features per node."""
    if max_features in (None, "all"):
        m = n_features
    elif max_features == "sqrt":
        m = max(1, int(math.sqrt(n_features)))
    elif max_features == "log2":
        m = max(1, int(math.log2(n_features))) if n_features > 1 else 1
    elif isinstance(max_features, bool):
        raise ParameterError(f"invalid max_features {max_features!r}")
    elif isinstance(max_features, int):
        m = max_features
    elif isinstance(max_features, float) and 0.0 < max_features <= 1.0:
        m = max(1, int(max_features * n_features))
    else:
        raise ParameterError(f"invalid max_features {max_features!r}")
    if m < 1 or m > n_features:
        raise ParameterError(f"max_features={max_features!r} gives {m} features per split, but only {n_features} are active")
    return m


def check_tree_params(max_depth: Optional[int], min_samples_leaf: int, criterion: str = "gini") -> None:
    if max_depth is not None and (isinstance(max_depth, bool) or not isinstance(max_depth, int) or max_depth < 1):
        raise ParameterError(f"max_depth must be a positive integer or null, got {max_depth!r}")
    if isinstance(min_samples_leaf, bool) or not isinstance(min_samples_leaf, int) or min_samples_leaf < 1:
        raise ParameterError(f"min_samples_leaf must be a positive integer, got {min_samples_leaf!r}")
    if criterion not in ("gini", "entropy", "squared_error"):
        raise ParameterError(f"unknown split criterion '{criterion}'")


def _impurity(counts: np.ndarray, totals: np.ndarray, criterion: str) -> np.ndarray:
    p = counts / np.maximum(totals, 1e-300)[..., None]
    if criterion == "gini":
        return 1.0 - np.sum(p * p, axis=-1)
    logs = np.log2(p, out=np.zeros_like(p), where=p > 0)
    return -np.sum(p * logs, axis=-1)


def _threshold(lo: float, hi: float) -> float:
    mid = lo + (hi - lo) / 2.0
    # adjacent floats: the midpoint can round up onto hi
    if not lo <= mid < hi:
        mid = lo
    return mid


class TreeBuilder:
    """Grows one tree over the rows with positive weight.

    ``targets`` are class codes for classification and float targets for
    regression. ``rng`` is only consulted when fewer than all features are
    candidates at each node.
    """

    def __init__(
        self,
        *,
        criterion: str = "gini",
        max_depth: Optional[int] = None,
        min_samples_leaf: int = 1,
        max_features: int,
        n_classes: int = 0,
        rng: Optional[np.random.Generator] = None,
    ):
        check_tree_params(max_depth, min_samples_leaf, criterion)
        self.criterion = criterion
        self.regression = criterion == "squared_error"
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.n_classes = n_classes
        self.rng = rng

    def build(self, X: np.ndarray, targets: np.ndarray, weights: Optional[np.ndarray] = None) -> Tree:
        n, d = X.shape
        if weights is None:
            weights = np.ones(n, dtype=np.float64)
        self._weights = np.asarray(weights, dtype=np.float64)
        rows = np.flatnonzero(weights > 0)
        if self.max_features > d:
            raise ParameterError(f"max_features {self.max_features} exceeds the {d} active features")
        if self.regression:
            stats = np.asarray(targets, dtype=np.float64)
        else:
            stats = np.zeros((n, self.n_classes), dtype=np.float64)
            stats[np.arange(n), targets] = weights

        feature: List[int] = []
        threshold: List[float] = []
        left: List[int] = []
        right: List[int] = []
        value: List[np.ndarray] = []

        def new_node(node_rows: np.ndarray) -> int:
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            if self.regression:
                w = self._weights[node_rows]
                value.append(np.array([np.sum(w * stats[node_rows]) / np.sum(w)]))
            else:
                value.append(stats[node_rows].sum(axis=0))
            return len(feature) - 1

        root = new_node(rows)
        stack = [(root, rows, 0)]
        while stack:
            node, node_rows, depth = stack.pop()
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            if node_rows.size < 2 * self.min_samples_leaf or self._is_pure(stats[node_rows], value[node]):
                continue
            split = self._best_split(X, stats, node_rows, d)
            if split is None:
                continue
            f, thr, go_left = split
            feature[node] = f
            threshold[node] = thr
            left_rows = node_rows[go_left]
            right_rows = node_rows[~go_left]
            left[node] = new_node(left_rows)
            right[node] = new_node(right_rows)
            stack.append((right[node], right_rows, depth + 1))
            stack.append((left[node], left_rows, depth + 1))

        width = 1 if self.regression else self.n_classes
        return Tree(
            feature=np.asarray(feature, dtype=np.int64),
            threshold=np.asarray(threshold, dtype=np.float64),
            left=np.asarray(left, dtype=np.int64),
            right=np.asarray(right, dtype=np.int64),
            value=np.asarray(value, dtype=np.float64).reshape(len(feature), width),
        )

    def _is_pure(self, node_stats: np.ndarray, node_value: np.ndarray) -> bool:
        if self.regression:
            return bool(np.ptp(node_stats) == 0.0)
        return int(np.count_nonzero(node_value > 0)) <= 1

    def _candidates(self, d: int) -> Sequence[int]:
        if self.max_features >= d:
            return range(d)
        return np.sort(self.rng.choice(d, size=self.max_features, replace=False))

    def _best_split(self, X: np.ndarray, stats: np.ndarray, node_rows: np.ndarray, d: int):
        k = node_rows.size
        msl = self.min_samples_leaf
        n_left = np.arange(1, k)
        size_ok = (n_left >= msl) & (k - n_left >= msl)
        best_child = np.inf
        best = None
        for f in self._candidates(d):
            xs_all = X[node_rows, f]
            order = np.argsort(xs_all, kind="stable")
            xs = xs_all[order]
            valid = size_ok & (xs[:-1] < xs[1:])
            if not valid.any():
                continue
            s = stats[node_rows[order]]
            if self.regression:
                sw = self._weights[node_rows[order]]
                ws = sw * s
                w_left = np.cumsum(sw)[:-1]
                cum = np.cumsum(ws)[:-1]
                cum2 = np.cumsum(ws * s)[:-1]
                w_total = w_left[-1] + sw[-1]
                total, total2 = cum[-1] + ws[-1], cum2[-1] + ws[-1] * s[-1]
                child = (cum2 - cum * cum / w_left) + ((total2 - cum2) - (total - cum) ** 2 / (w_total - w_left))
            else:
                cum = np.cumsum(s, axis=0)[:-1]
                right_counts = cum[-1] + s[-1] - cum
                w_left = cum.sum(axis=1)
                w_right = right_counts.sum(axis=1)
                child = w_left * _impurity(cum, w_left, self.criterion) + w_right * _impurity(
                    right_counts, w_right, self.criterion
                )
            child = np.where(valid, child, np.inf)
            pos = int(np.argmin(child))
            if child[pos] < best_child:
                best_child = child[pos]
                best = (int(f), _threshold(float(xs[pos]), float(xs[pos + 1])))
        if best is None:
            return None
        f, thr = best
        return f, thr, X[node_rows, f] <= thr


def fit_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    *,
    weights: Optional[np.ndarray] = None,
    criterion: str = "gini",
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 1,
    max_features: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tree:
    builder = TreeBuilder(
        criterion=criterion,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        max_features=X.shape[1] if max_features is None else max_features,
        n_classes=n_classes,
        rng=rng,
    )
    return builder.build(X, y, weights)


def fit_regression_tree(
    X: np.ndarray,
    targets: np.ndarray,
    *,
    weights: Optional[np.ndarray] = None,
    max_depth: Optional[int] = 3,
    min_samples_leaf: int = 1,
) -> Tree:
    builder = TreeBuilder(
        criterion="squared_error",
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        max_features=X.shape[1],
    )
    return builder.build(X, targets, weights)


__all__ = [
    "LEAF",
    "Tree",
    "TreeBuilder",
    "check_tree_params",
    "fit_classification_tree",
    "fit_regression_tree",
    "resolve_max_features",
]
