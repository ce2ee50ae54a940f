"""Evaluation report: per-class recall/F1, supports, macro averages and the confusion matrix."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ValidationError

from app.core.errors import InputParseError
from app.core.eval.metrics import accuracy, confusion_matrix, macro_averages, per_class_metrics
from app.core.features import Dataset
from app.core.ml.model import TrainedModel
from app.core.ml.split import SplitIndices

logger = logging.getLogger(__name__)


class ClassReport(BaseModel):
    label: str
    recall: float
    precision: float
    f1: float
    support_actual: int
    support_predicted: int
    recall_undefined: bool = False
    precision_undefined: bool = False
    f1_undefined: bool = False


class EvalMeta(BaseModel):
    model_kind: str
    hyperparameters: Dict[str, Any]
    train_seed: Optional[int] = None
    split_seed: int
    split_mode: str = "stratified"
    train_fraction: float = 0.8
    active_features: List[str]
    feature_mask: List[str] = []
    dataset_fingerprint: str
    test_size: int


class EvalReport(BaseModel):
    format: Literal["lossnet-eval"] = "lossnet-eval"
    format_version: int = 1
    per_class: List[ClassReport]
    macro_recall: float
    macro_f1: float
    accuracy: float
    confusion: List[List[int]]
    meta: EvalMeta

    def class_report(self, label: str) -> ClassReport:
        for entry in self.per_class:
            if entry.label == label:
                return entry
        raise KeyError(label)

    @property
    def undefined_metrics(self) -> List[str]:
        flags = []
        for entry in self.per_class:
            for metric in ("recall", "precision", "f1"):
                if getattr(entry, f"{metric}_undefined"):
                    flags.append(f"{entry.label}.{metric}")
        return flags


def build_report(actual, predicted, meta: EvalMeta) -> EvalReport:
    cm = confusion_matrix(actual, predicted)
    per_class = per_class_metrics(cm)
    macro_recall, macro_f1 = macro_averages(per_class)
    return EvalReport(
        per_class=[ClassReport(**vars(m)) for m in per_class],
        macro_recall=macro_recall,
        macro_f1=macro_f1,
        accuracy=accuracy(cm),
        confusion=cm.tolist(),
        meta=meta,
    )


def evaluate(model: TrainedModel, dataset: Dataset, split: SplitIndices) -> EvalReport:
    """Score ``model`` on the test side of ``split``."""
    predicted = model.predict_dataset(dataset, split.test_rows)
    actual = dataset.labels(split.test_rows)
    meta = EvalMeta(
        model_kind=model.kind,
        hyperparameters=model.params,
        train_seed=model.train_meta.get("seed"),
        split_seed=split.seed,
        split_mode=split.mode,
        train_fraction=split.train_fraction,
        active_features=list(dataset.active_features),
        feature_mask=list(dataset.masked_features),
        dataset_fingerprint=dataset.fingerprint(),
        test_size=int(split.test_rows.size),
    )
    report = build_report(actual, predicted, meta)
    if report.undefined_metrics:
        logger.warning("Zero-denominator metrics reported as 0: %s", ", ".join(report.undefined_metrics))
    return report


def report_to_json(report: BaseModel) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2, allow_nan=False) + "\n"


def save_report(report: BaseModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_to_json(report), encoding="utf-8")
    logger.info("Wrote report to %s", path)
    return path


def load_report(path: Path, model_cls=EvalReport):
    path = Path(path)
    if not path.exists():
        raise InputParseError("report not found", path=path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputParseError(f"malformed report: {exc.msg}", path=path, offset=exc.pos) from None
    try:
        return model_cls.model_validate(data)
    except ValidationError as exc:
        raise InputParseError(f"invalid report: {exc.errors()[0]['msg']}", path=path) from None


__all__ = ["ClassReport", "EvalMeta", "EvalReport", "build_report", "evaluate", "load_report", "report_to_json", "save_report"]
