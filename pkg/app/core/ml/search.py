"""Grid search with stratified k-fold cross-validation on the training side of a split."""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.errors import UsageError
from app.core.eval.metrics import macro_recall_score
from app.core.features import Dataset
from app.core.ml.model import make_estimator, resolve_kind
from app.core.ml.split import SplitIndices, stratified_folds
from app.core.tasks import derive_seed, run_tasks

logger = logging.getLogger(__name__)

HyperGrid = Mapping[str, Sequence[Any]]


def expand_grid(grid: HyperGrid) -> List[Dict[str, Any]]:
    """Cartesian product in key order, last key varying fastest."""
    if not grid:
        raise UsageError("hyperparameter grid is empty")
    for name, values in grid.items():
        if not isinstance(values, (list, tuple)) or not values:
            raise UsageError(f"grid entry '{name}' must be a nonempty list")
    names = list(grid)
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def _depth_key(depth: Optional[int]) -> float:
    return math.inf if depth is None else depth


def complexity(kind: str, params: Mapping[str, Any]) -> Tuple[float, ...]:
    """Smaller tuples mean smaller models."""
    if kind == "decision_tree":
        return (_depth_key(params.get("max_depth")),)
    if kind == "random_forest":
        return (params.get("n_trees", 0), _depth_key(params.get("max_depth")))
    if kind == "gradient_boosting":
        return (params.get("n_stages", 0), _depth_key(params.get("max_depth")))
    if kind == "logistic_regression":
        return (params.get("iterations", 0),)
    if kind == "knn":
        return (params.get("k", 0),)
    return ()


@dataclass(frozen=True)
class _FoldTask:
    kind: str
    params: Dict[str, Any]
    X: np.ndarray
    y: np.ndarray
    train_rows: np.ndarray
    test_rows: np.ndarray
    seed: int


def _run_fold(task: _FoldTask) -> float:
    estimator = make_estimator(task.kind, task.params)
    estimator.fit(task.X[task.train_rows], task.y[task.train_rows], seed=task.seed)
    predicted = estimator.predict(task.X[task.test_rows])
    return macro_recall_score(task.y[task.test_rows], predicted)


@dataclass
class SearchResult:
    kind: str
    best_params: Dict[str, Any]
    best_index: int
    cv_table: pd.DataFrame


def grid_search(
    kind: str,
    grid: HyperGrid,
    dataset: Dataset,
    split: SplitIndices,
    folds: int = 5,
    seed: int = 1,
    jobs: int = 1,
) -> SearchResult:
    """Pick the grid point with the best mean cross-validated macro recall.

    Ties go to the smaller model, then to the earlier grid point.
    """
    kind = resolve_kind(kind)
    points = expand_grid(grid)
    for params in points:
        make_estimator(kind, params)
    fold_rows = stratified_folds(dataset.y, split.train_rows, folds, seed)
    X = dataset.active_matrix()
    y = dataset.y

    tasks = []
    for p, params in enumerate(points):
        for f in range(folds):
            train_rows = np.concatenate([fold_rows[j] for j in range(folds) if j != f])
            tasks.append(
                _FoldTask(kind, params, X, y, np.sort(train_rows), fold_rows[f], derive_seed(seed, f))
            )
    scores = run_tasks(_run_fold, tasks, jobs=jobs, description=f"Grid search {kind}")
    per_point = np.asarray(scores, dtype=np.float64).reshape(len(points), folds)
    means = per_point.mean(axis=1)

    best = max(
        range(len(points)),
        key=lambda i: (means[i], tuple(-c for c in complexity(kind, points[i])), -i),
    )
    records = []
    order = sorted(
        range(len(points)),
        key=lambda i: (-means[i], complexity(kind, points[i]), i),
    )
    rank = {i: r + 1 for r, i in enumerate(order)}
    for i, params in enumerate(points):
        record = {"point": i, "params": json.dumps(params, sort_keys=True)}
        for f in range(folds):
            record[f"fold_{f}_macro_recall"] = per_point[i, f]
        record["mean_macro_recall"] = means[i]
        record["std_macro_recall"] = per_point[i].std()
        record["rank"] = rank[i]
        record["selected"] = i == best
        records.append(record)
    table = pd.DataFrame.from_records(records)
    logger.info("Grid search %s: %d points x %d folds, best %s (mean macro recall %.4f)", kind, len(points), folds, points[best], means[best])
    return SearchResult(kind=kind, best_params=points[best], best_index=best, cv_table=table)


def save_cv_table(result: SearchResult, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    result.cv_table.to_csv(path, index=False, lineterminator="\n")
    return path


__all__ = ["HyperGrid", "SearchResult", "complexity", "expand_grid", "grid_search", "save_cv_table"]
