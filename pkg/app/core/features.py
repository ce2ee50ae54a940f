"""
Per-packet feature extraction.

Turns a packet trace into the labeled dataset the classifiers train on. The
RTT estimators run over the trace the way the sending host would run them:
a sample becomes visible when its ACK arrives, and every row carries the
estimator state as of the packet's send time.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.errors import InputParseError, NoRttReferenceError, SchemaMismatchError, UsageError
from app.core.labels import N_CLASSES, LossLabel
from app.core.sim.trace import PacketTrace
from config import FEATURE_GROUPS, FEATURE_NAMES, LABELS

logger = logging.getLogger(__name__)

SRTT_ALPHA = 1.0 / 8.0
JITTER_GAIN = 1.0 / 16.0
DEFAULT_WARMUP = 1
CSV_COLUMNS = FEATURE_NAMES + ("label",)


def update_srtt(srtt_ms: Optional[float], sample_ms: float, alpha: float = SRTT_ALPHA) -> float:
    """Exponentially weighted RTT average. ``srtt_ms=None`` means no sample yet."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if srtt_ms is None:
        return sample_ms
    return (1.0 - alpha) * srtt_ms + alpha * sample_ms


def update_jitter(jitter_ms: float, rtt_curr_ms: float, rtt_prev_ms: float) -> float:
    """Smoothed RTT variation, gain 1/16."""
    return jitter_ms + (abs(rtt_curr_ms - rtt_prev_ms) - jitter_ms) * JITTER_GAIN


@dataclass(frozen=True)
class FeatureRow:
    timestamp_s: float
    pkt_size_bytes: float
    rtt_ms: float
    avg_rtt_ms: float
    jitter_ms: float
    cwnd_segments: float
    label: LossLabel

    def values(self) -> Tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)


class Dataset:
    """Feature matrix, label codes and the set of columns training may read.

    ``X`` and ``y`` are read-only. Masking returns a new Dataset sharing the
    same arrays; only ``active_features`` columns are ever handed to models.
    """

    def __init__(
        self,
        X: np.ndarray,
        y: np.ndarray,
        feature_names: Sequence[str] = FEATURE_NAMES,
        active_mask: Optional[Sequence[bool]] = None,
    ):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != len(feature_names):
            raise ValueError(f"feature matrix must have shape (n, {len(feature_names)}), got {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError("label vector length does not match feature rows")
        X.setflags(write=False)
        y.setflags(write=False)
        self.X = X
        self.y = y
        self.feature_names = tuple(feature_names)
        if active_mask is None:
            active_mask = (True,) * len(self.feature_names)
        self.active_mask = tuple(bool(m) for m in active_mask)

    def __len__(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_rows(cls, rows: Iterable[FeatureRow]) -> "Dataset":
        rows = list(rows)
        X = np.array([row.values() for row in rows], dtype=np.float64).reshape(len(rows), len(FEATURE_NAMES))
        y = np.array([row.label.code for row in rows], dtype=np.int64)
        return cls(X, y)

    @property
    def active_features(self) -> Tuple[str, ...]:
        return tuple(name for name, on in zip(self.feature_names, self.active_mask) if on)

    @property
    def masked_features(self) -> Tuple[str, ...]:
        return tuple(name for name, on in zip(self.feature_names, self.active_mask) if not on)

    def column_indices(self, names: Sequence[str]) -> List[int]:
        return [self.feature_names.index(name) for name in names]

    def active_matrix(self, rows: Optional[np.ndarray] = None) -> np.ndarray:
        cols = self.column_indices(self.active_features)
        X = self.X if rows is None else self.X[rows]
        return X[:, cols]

    def labels(self, rows: Optional[np.ndarray] = None) -> np.ndarray:
        return self.y if rows is None else self.y[rows]

    @property
    def rows(self) -> List[FeatureRow]:
        return [
            FeatureRow(*(float(v) for v in self.X[i]), label=LossLabel.from_code(self.y[i]))
            for i in range(len(self))
        ]

    def class_counts(self, rows: Optional[np.ndarray] = None) -> np.ndarray:
        return np.bincount(self.labels(rows), minlength=N_CLASSES)

    def without(self, groups: Iterable[str], allow_empty: bool = False) -> "Dataset":
        """Mask the columns of the named feature groups (``rtt`` masks both RTT columns)."""
        removed = set()
        for group in groups:
            if group not in FEATURE_GROUPS:
                raise UsageError(f"unknown feature group '{group}' (expected one of {', '.join(FEATURE_GROUPS)})")
            removed.update(FEATURE_GROUPS[group])
        mask = tuple(on and name not in removed for name, on in zip(self.feature_names, self.active_mask))
        if not any(mask) and not allow_empty:
            raise UsageError(
                "masking leaves no active feature; keep at least one feature group, "
                "or pass allow_empty (--allow-empty) to score a majority-class baseline"
            )
        return Dataset(self.X, self.y, self.feature_names, mask)

    def with_column(self, name: str, values: np.ndarray) -> "Dataset":
        """Copy with one column's stored values replaced (mask unchanged)."""
        X = np.array(self.X, copy=True)
        X[:, self.feature_names.index(name)] = values
        return Dataset(X, self.y, self.feature_names, self.active_mask)

    def fingerprint(self) -> str:
        """sha256 over column names, values and labels. Independent of the mask."""
        h = hashlib.sha256()
        h.update(",".join(self.feature_names).encode("utf-8"))
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()


def extract_features(trace: PacketTrace, warmup: int = DEFAULT_WARMUP) -> Dataset:
    """One row per original transmission sent once an RTT sample is visible.

    Packets sent before the first acknowledgement arrives have no RTT
    reference and never yield a row. The first ``warmup`` originals are
    skipped as well; with ``init_cwnd`` 1 both rules drop only packet 0.
    """
    if warmup < 0:
        raise UsageError(f"warmup must be non-negative, got {warmup}")
    originals = trace.originals()
    if not originals:
        raise InputParseError("trace holds no packets")
    samples = sorted(
        (ev.ack_time_s, i, ev.measured_rtt_ms)
        for i, ev in enumerate(trace.events)
        if ev.measured_rtt_ms is not None
    )
    if not samples:
        raise NoRttReferenceError()

    rows: List[Tuple[float, ...]] = []
    labels: List[int] = []
    srtt: Optional[float] = None
    jitter = 0.0
    last: Optional[float] = None
    nxt = 0
    blind = 0
    for i, ev in enumerate(originals):
        while nxt < len(samples) and samples[nxt][0] <= ev.send_time_s:
            sample = samples[nxt][2]
            if last is not None:
                jitter = update_jitter(jitter, sample, last)
            srtt = update_srtt(srtt, sample)
            last = sample
            nxt += 1
        if last is None:
            blind += 1
            continue
        if i < warmup:
            continue
        rows.append((ev.send_time_s, ev.size_bytes, last, srtt, jitter, ev.cwnd_at_send_segments))
        labels.append(ev.fate.code)
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(FEATURE_NAMES))
    dataset = Dataset(X, np.asarray(labels, dtype=np.int64))
    logger.info(
        "Extracted %d feature rows (%d sent before the first ACK, %d warmup skipped)",
        len(rows),
        blind,
        len(originals) - len(rows) - blind,
    )
    return dataset



@dataclass(frozen=True)
class ClassSummary:
    total: int
    counts: Dict[str, int]

    def percent(self, label: str) -> float:
        if self.total == 0:
            return 0.0
        return 100.0 * self.counts[label] / self.total

    def percentages(self) -> Dict[str, float]:
        """Percent of rows per label, rounded to 2 decimals."""
        return {label: round(self.percent(label), 2) for label in LABELS}

    @property
    def total_drops(self) -> int:
        return self.counts["qDrop"] + self.counts["wDrop"]


def class_summary(dataset: Dataset) -> ClassSummary:
    counts = dataset.class_counts()
    return ClassSummary(total=len(dataset), counts={label: int(counts[i]) for i, label in enumerate(LABELS)})


def save_dataset(dataset: Dataset, path: Path) -> Path:
    """Write the dataset CSV. Every column is written, masked or not."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(dataset.X, columns=list(dataset.feature_names))
    df["pkt_size_bytes"] = df["pkt_size_bytes"].astype("int64")
    df["label"] = [LABELS[code] for code in dataset.y]
    df.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.info("Wrote %d rows to %s", len(dataset), path)
    return path


def load_dataset(path: Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise InputParseError("dataset not found", path=path)
    try:
        df = pd.read_csv(path, float_precision="round_trip", dtype={"label": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputParseError(f"cannot parse dataset: {exc}", path=path) from None

    columns = tuple(df.columns)
    if columns != CSV_COLUMNS:
        missing = [c for c in CSV_COLUMNS if c not in columns]
        unexpected = [c for c in columns if c not in CSV_COLUMNS]
        if missing or unexpected:
            raise SchemaMismatchError(f"dataset {path} has the wrong columns", missing=missing, unexpected=unexpected)
        raise InputParseError(f"dataset header must be exactly '{','.join(CSV_COLUMNS)}'", path=path)

    X = np.zeros((len(df), len(FEATURE_NAMES)), dtype=np.float64)
    for j, name in enumerate(FEATURE_NAMES):
        raw = df[name]
        empty = raw.isna().to_numpy()
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
        unparsed = np.isnan(values) & ~empty
        if unparsed.any():
            line = int(np.flatnonzero(unparsed)[0]) + 2
            raise InputParseError(f"line {line}: '{name}' is not a number", path=path)
        if empty.any():
            line = int(np.flatnonzero(empty)[0]) + 2
            raise SchemaMismatchError(f"dataset {path} line {line}: missing value for feature '{name}'", missing=[name])
        bad = ~np.isfinite(values) | (values < 0)
        if bad.any():
            line = int(np.flatnonzero(bad)[0]) + 2
            raise InputParseError(f"line {line}: '{name}' must be a finite non-negative number", path=path)
        X[:, j] = values

    codes = {label: i for i, label in enumerate(LABELS)}
    y = np.zeros(len(df), dtype=np.int64)
    for i, label in enumerate(df["label"]):
        if label not in codes:
            raise InputParseError(f"line {i + 2}: unknown label '{label}'", path=path)
        y[i] = codes[label]
    logger.debug("Loaded %d rows from %s", len(df), path)
    return Dataset(X, y)


__all__ = [
    "CSV_COLUMNS",
    "ClassSummary",
    "Dataset",
    "FeatureRow",
    "class_summary",
    "extract_features",
    "load_dataset",
    "save_dataset",
    "update_jitter",
    "update_srtt",
]
