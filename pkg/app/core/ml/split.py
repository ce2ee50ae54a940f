"""Train/test splitting and cross-validation folds."""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np

from app.core.errors import FoldConstructionError, UnsplittableClassError, UsageError
from app.core.features import Dataset
from config import LABELS

logger = logging.getLogger(__name__)

SPLIT_MODES = ("stratified", "time")


@dataclass(frozen=True)
class SplitIndices:
    train_rows: np.ndarray
    test_rows: np.ndarray
    seed: int
    mode: str = "stratified"
    train_fraction: float = 0.8

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "mode": self.mode,
            "train_fraction": self.train_fraction,
            "train_size": int(self.train_rows.size),
            "test_size": int(self.test_rows.size),
        }


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(
    dataset: Dataset,
    train_fraction: float = 0.8,
    seed: int = 1,
    mode: str = "stratified",
) -> SplitIndices:
    """Split rows into train and test sides.

    ``stratified``: per class, ``round((1 - train_fraction) * n_c)`` rows go to
    the test side, clamped so both sides get at least one row. ``time``: the
    first ``round(train_fraction * n)`` rows in send order train, the rest test.
    """
    if not 0.0 < train_fraction < 1.0:
        raise UsageError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if mode not in SPLIT_MODES:
        raise UsageError(f"unknown split mode '{mode}' (expected one of {', '.join(SPLIT_MODES)})")
    n = len(dataset)
    if n == 0:
        raise UsageError("cannot split an empty dataset")

    if mode == "time":
        order = np.argsort(dataset.X[:, dataset.feature_names.index("timestamp_s")], kind="stable")
        n_train = min(max(_round_half_up(train_fraction * n), 1), n - 1) if n > 1 else 1
        train, test = np.sort(order[:n_train]), np.sort(order[n_train:])
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        train_parts: List[np.ndarray] = []
        test_parts: List[np.ndarray] = []
        for code, label in enumerate(LABELS):
            rows = np.flatnonzero(dataset.y == code)
            n_c = rows.size
            if n_c == 0:
                continue
            if n_c == 1:
                raise UnsplittableClassError(
                    f"class '{label}' has a single row and cannot appear on both sides of the split"
                )
            n_test = min(max(_round_half_up((1.0 - train_fraction) * n_c), 1), n_c - 1)
            shuffled = rng.permutation(rows)
            test_parts.append(shuffled[:n_test])
            train_parts.append(shuffled[n_test:])
        train = np.sort(np.concatenate(train_parts))
        test = np.sort(np.concatenate(test_parts))
    logger.debug("Split %d rows (%s, seed=%d): %d train / %d test", n, mode, seed, train.size, test.size)
    return SplitIndices(train_rows=train, test_rows=test, seed=seed, mode=mode, train_fraction=train_fraction)


def stratified_folds(y: np.ndarray, rows: np.ndarray, folds: int, seed: int) -> List[np.ndarray]:
    """Deal each class's rows round-robin into ``folds`` folds after a seeded shuffle.

    The dealing position carries over from one class to the next so fold
    sizes differ by at most one row.
    """
    if isinstance(folds, bool) or not isinstance(folds, int) or folds < 2:
        raise UsageError(f"folds must be an integer >= 2, got {folds!r}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    assignment: List[List[int]] = [[] for _ in range(folds)]
    position = 0
    labels = y[rows]
    for code, label in enumerate(LABELS):
        members = rows[labels == code]
        if members.size == 0:
            continue
        if members.size < folds:
            raise FoldConstructionError(
                f"class '{label}' has {members.size} training rows, fewer than {folds} folds; use fewer folds"
            )
        for row in rng.permutation(members):
            assignment[position % folds].append(int(row))
            position += 1
    return [np.sort(np.asarray(fold, dtype=np.int64)) for fold in assignment]


__all__ = ["SPLIT_MODES", "SplitIndices", "stratified_folds", "stratified_split"]
