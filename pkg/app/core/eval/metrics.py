"""Confusion matrix and per-class metrics over the three loss labels."""

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from app.core.errors import UsageError
from app.core.labels import N_CLASSES, LossLabel
from config import LABELS

LabelLike = Union[int, str, LossLabel]


def _codes(labels: Sequence[LabelLike]) -> np.ndarray:
    if isinstance(labels, np.ndarray) and labels.dtype.kind in "iu":
        codes = labels.astype(np.int64)
    else:
        codes = np.array(
            [lab if isinstance(lab, (int, np.integer)) else LossLabel.parse(str(getattr(lab, "value", lab))).code for lab in labels],
            dtype=np.int64,
        )
    if codes.size and (codes.min() < 0 or codes.max() >= N_CLASSES):
        raise UsageError("label codes must lie in 0..2")
    return codes


def confusion_matrix(actual: Sequence[LabelLike], predicted: Sequence[LabelLike]) -> np.ndarray:
    """3x3 counts; rows are actual labels, columns predicted, both in class order."""
    if len(actual) != len(predicted):
        raise UsageError(f"actual and predicted differ in length ({len(actual)} vs {len(predicted)})")
    a = _codes(actual)
    p = _codes(predicted)
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (a, p), 1)
    return cm


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    recall: float
    precision: float
    f1: float
    support_actual: int
    support_predicted: int
    recall_undefined: bool = False
    precision_undefined: bool = False
    f1_undefined: bool = False


def per_class_metrics(confusion: np.ndarray) -> List[ClassMetrics]:
    """Recall, precision and F1 per class. Zero denominators give 0 and set the matching flag."""
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.shape != (N_CLASSES, N_CLASSES) or (cm < 0).any():
        raise UsageError(f"confusion matrix must be a non-negative {N_CLASSES}x{N_CLASSES} count matrix")
    out = []
    for c, label in enumerate(LABELS):
        tp = int(cm[c, c])
        actual = int(cm[c, :].sum())
        predicted = int(cm[:, c].sum())
        recall = tp / actual if actual else 0.0
        precision = tp / predicted if predicted else 0.0
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
        out.append(
            ClassMetrics(
                label=label,
                recall=recall,
                precision=precision,
                f1=f1,
                support_actual=actual,
                support_predicted=predicted,
                recall_undefined=actual == 0,
                precision_undefined=predicted == 0,
                f1_undefined=denom == 0,
            )
        )
    return out


def macro_averages(per_class: Sequence[ClassMetrics]) -> Tuple[float, float]:
    """(macro recall, macro F1): unweighted means over all three classes."""
    if len(per_class) != N_CLASSES:
        raise UsageError(f"macro averages need {N_CLASSES} per-class entries, got {len(per_class)}")
    macro_recall = sum(m.recall for m in per_class) / N_CLASSES
    macro_f1 = sum(m.f1 for m in per_class) / N_CLASSES
    return macro_recall, macro_f1


def macro_recall_score(actual: Sequence[LabelLike], predicted: Sequence[LabelLike]) -> float:
    return macro_averages(per_class_metrics(confusion_matrix(actual, predicted)))[0]


def accuracy(confusion: np.ndarray) -> float:
    total = int(np.sum(confusion))
    return float(np.trace(confusion)) / total if total else 0.0
