"""
Feature ablation: retrain and re-evaluate every model kind with feature
groups removed.

Hyperparameters are picked once per kind by grid search on the
all-features dataset and reused for every row; explicit ``params`` skip the
search for that kind, and ``tune=False`` falls back to ``DEFAULT_PARAMS``.
For rows that mask columns, the masked columns of the test rows are
shuffled and the model re-run; the number of changed predictions is stored
and must be zero.

A row that removes every feature is refused unless ``allow_empty`` is set,
in which case it scores the majority class of the training rows.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from app.core.eval.metrics import confusion_matrix, macro_averages, per_class_metrics
from app.core.eval.report import evaluate
from app.core.features import Dataset
from app.core.ml.model import resolve_kind, train_model
from app.core.ml.search import grid_search
from app.core.ml.split import SplitIndices, stratified_split
from app.core.tasks import derive_seed, run_tasks
from config import ABLATION_ROWS, DEFAULT_GRIDS, DEFAULT_PARAMS, FEATURE_GROUPS, MODEL_KINDS

logger = logging.getLogger(__name__)

FeatureSet = Tuple[str, str, Sequence[str]]


class SeedResult(BaseModel):
    seed: int
    macro_recall: float
    macro_f1: float
    permutation_changes: int = 0


class AblationCell(BaseModel):
    kind: str
    macro_recall: float
    macro_f1: float
    per_seed: List[SeedResult]


class AblationRow(BaseModel):
    row_id: str
    title: str
    removed_groups: List[str]
    removed_features: List[str]
    cells: List[AblationCell]

    def cell(self, kind: str) -> AblationCell:
        for cell in self.cells:
            if cell.kind == kind:
                return cell
        raise KeyError(kind)


class AblationReport(BaseModel):
    format: Literal["lossnet-ablation"] = "lossnet-ablation"
    format_version: int = 1
    kinds: List[str]
    seeds: List[int]
    params: Dict[str, Dict[str, Any]]
    tuned: List[str] = []
    dataset_fingerprint: str
    split_mode: str = "stratified"
    train_fraction: float = 0.8
    rows: List[AblationRow]

    def row(self, row_id: str) -> AblationRow:
        for row in self.rows:
            if row.row_id == row_id:
                return row
        raise KeyError(row_id)

    def to_frame(self) -> pd.DataFrame:
        """Long-format grid: one line per (row, kind, seed)."""
        records = []
        for row in self.rows:
            for cell in row.cells:
                for result in cell.per_seed:
                    records.append(
                        {
                            "row_id": row.row_id,
                            "removed": "+".join(row.removed_groups),
                            "kind": cell.kind,
                            "seed": result.seed,
                            "macro_recall": result.macro_recall,
                            "macro_f1": result.macro_f1,
                            "permutation_changes": result.permutation_changes,
                        }
                    )
        return pd.DataFrame.from_records(records)


@dataclass(frozen=True)
class _CellTask:
    row_index: int
    kind: str
    seed: int
    dataset: Dataset
    split: SplitIndices
    params: Dict[str, Any]


def mask_permutation_changes(model, dataset: Dataset, split: SplitIndices, seed: int) -> int:
    """Predictions changed by shuffling every masked column across the test rows."""
    masked = dataset.masked_features
    if not masked:
        return 0
    baseline = model.predict_dataset(dataset, split.test_rows)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 7)))
    shuffled = dataset
    for name in masked:
        column = np.array(dataset.X[:, dataset.feature_names.index(name)], copy=True)
        column[split.test_rows] = rng.permutation(column[split.test_rows])
        shuffled = shuffled.with_column(name, column)
    return int(np.count_nonzero(model.predict_dataset(shuffled, split.test_rows) != baseline))


def majority_baseline(dataset: Dataset, split: SplitIndices) -> Tuple[float, float]:
    """(macro recall, macro F1) of predicting the most common training label for every test row."""
    majority = int(np.argmax(np.bincount(dataset.y[split.train_rows])))
    actual = dataset.y[split.test_rows]
    cm = confusion_matrix(actual, np.full(actual.shape[0], majority, dtype=np.int64))
    return macro_averages(per_class_metrics(cm))


def _run_cell(task: _CellTask) -> SeedResult:
    if not any(task.dataset.active_mask):
        macro_recall, macro_f1 = majority_baseline(task.dataset, task.split)
        return SeedResult(seed=task.seed, macro_recall=macro_recall, macro_f1=macro_f1)
    model = train_model(task.kind, task.dataset, task.split, task.params, seed=task.seed)
    report = evaluate(model, task.dataset, task.split)
    changes = mask_permutation_changes(model, task.dataset, task.split, task.seed)
    if changes:
        logger.error("Masked columns changed %d predictions for %s (seed %d)", changes, task.kind, task.seed)
    return SeedResult(seed=task.seed, macro_recall=report.macro_recall, macro_f1=report.macro_f1, permutation_changes=changes)


def run_ablation(
    dataset: Dataset,
    split: Optional[SplitIndices] = None,
    kinds: Optional[Sequence[str]] = None,
    feature_sets: Sequence[FeatureSet] = tuple(ABLATION_ROWS),
    seeds: Sequence[int] = (1,),
    params: Optional[Mapping[str, Mapping[str, Any]]] = None,
    jobs: int = 1,
    train_fraction: float = 0.8,
    split_mode: str = "stratified",
    tune: bool = True,
    grids: Optional[Mapping[str, Mapping[str, Sequence[Any]]]] = None,
    folds: int = 5,
    allow_empty: bool = False,
) -> AblationReport:
    """Run the (feature set x kind x seed) grid.

    With ``split`` given every seed reuses it and only the training seed
    varies; otherwise seed ``s`` also splits with ``stratified_split(seed=s)``.
    Grid search runs on the training rows of the first seed's split.
    """
    kinds = [resolve_kind(k) for k in (kinds or [kind for kind, _, _ in MODEL_KINDS])]
    seeds = list(seeds)
    params = {resolve_kind(k): v for k, v in (params or {}).items()}
    masked = [dataset.without(groups, allow_empty=allow_empty) for _, _, groups in feature_sets]
    splits = {
        seed: split if split is not None else stratified_split(dataset, train_fraction, seed, split_mode)
        for seed in seeds
    }

    resolved_params: Dict[str, Dict[str, Any]] = {}
    tuned = []
    for kind in kinds:
        if kind in params:
            resolved_params[kind] = dict(params[kind])
        elif tune:
            grid = {resolve_kind(k): v for k, v in (grids or {}).items()}.get(kind, DEFAULT_GRIDS[kind])
            result = grid_search(kind, grid, dataset, splits[seeds[0]], folds=folds, seed=seeds[0], jobs=jobs)
            resolved_params[kind] = {**DEFAULT_PARAMS[kind], **result.best_params}
            tuned.append(kind)
        else:
            resolved_params[kind] = dict(DEFAULT_PARAMS[kind])

    tasks = [
        _CellTask(r, kind, seed, masked[r], splits[seed], resolved_params[kind])
        for r in range(len(feature_sets))
        for kind in kinds
        for seed in seeds
    ]
    results = iter(run_tasks(_run_cell, tasks, jobs=jobs, description="Ablation"))

    rows = []
    for r, (row_id, title, groups) in enumerate(feature_sets):
        cells = []
        for kind in kinds:
            per_seed = [next(results) for _ in seeds]
            cells.append(
                AblationCell(
                    kind=kind,
                    macro_recall=float(np.mean([s.macro_recall for s in per_seed])),
                    macro_f1=float(np.mean([s.macro_f1 for s in per_seed])),
                    per_seed=per_seed,
                )
            )
        removed = [name for group in groups for name in FEATURE_GROUPS[group]]
        rows.append(AblationRow(row_id=row_id, title=title, removed_groups=list(groups), removed_features=removed, cells=cells))
    return AblationReport(
        kinds=kinds,
        seeds=seeds,
        params=resolved_params,
        tuned=tuned,
        dataset_fingerprint=dataset.fingerprint(),
        split_mode=split.mode if split is not None else split_mode,
        train_fraction=split.train_fraction if split is not None else train_fraction,
        rows=rows,
    )


__all__ = [
    "AblationCell",
    "AblationReport",
    "AblationRow",
    "SeedResult",
    "majority_baseline",
    "mask_permutation_changes",
    "run_ablation",
]
