"""
Trained models: the uniform predict contract, the kind registry and the
model file format.

Model file (JSON)::

    {"format": "lossnet-model", "format_version": 1, "kind": "...",
     "params": {...}, "feature_schema": [...], "classes": [...],
     "train_meta": {...}, "state": {...}}

Files with a newer ``format_version`` than this build understands are
rejected.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Type

import numpy as np

from app.core.errors import ConfigError, InputParseError, ParameterError, SchemaMismatchError, UsageError
from app.core.features import Dataset
from app.core.labels import LossLabel
from app.core.ml.base import Estimator
from app.core.ml.boosting import GradientBoostingClassifier
from app.core.ml.forest import DecisionTreeClassifier, RandomForestClassifier
from app.core.ml.knn import KNeighborsClassifier
from app.core.ml.logistic import LogisticRegressionClassifier
from app.core.ml.split import SplitIndices
from app.core.sim.engine import LossContext
from config import DEFAULT_PARAMS, LABELS, MODEL_KINDS

logger = logging.getLogger(__name__)

MODEL_FORMAT = "lossnet-model"
MODEL_FORMAT_VERSION = 1

ESTIMATORS: Dict[str, Type[Estimator]] = {
    cls.kind: cls
    for cls in (
        DecisionTreeClassifier,
        RandomForestClassifier,
        GradientBoostingClassifier,
        LogisticRegressionClassifier,
        KNeighborsClassifier,
    )
}

KIND_ALIASES = {alias: kind for kind, alias, _ in MODEL_KINDS}
KIND_TITLES = {kind: title for kind, _, title in MODEL_KINDS}


def resolve_kind(name: str) -> str:
    """Map a kind id or CLI alias to the kind id."""
    if name in ESTIMATORS:
        return name
    if name in KIND_ALIASES:
        return KIND_ALIASES[name]
    valid = ", ".join(f"{alias} ({kind})" for kind, alias, _ in MODEL_KINDS)
    raise UsageError(f"unknown model kind '{name}'; valid kinds: {valid}")


def make_estimator(kind: str, params: Mapping[str, Any]) -> Estimator:
    kind = resolve_kind(kind)
    merged = dict(DEFAULT_PARAMS[kind])
    merged.update(params)
    try:
        return ESTIMATORS[kind](**merged)
    except TypeError as exc:
        raise ParameterError(f"invalid parameters for {kind}: {exc}") from None


@dataclass
class TrainedModel:
    """A fitted estimator plus the feature columns it reads, in order."""

    kind: str
    params: Dict[str, Any]
    feature_schema: Tuple[str, ...]
    estimator: Estimator
    classes: Tuple[str, ...] = LABELS
    train_meta: Dict[str, Any] = field(default_factory=dict)

    def _check_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_schema):
            raise SchemaMismatchError(
                f"model reads {len(self.feature_schema)} features ({', '.join(self.feature_schema)}), "
                f"input has shape {X.shape}"
            )
        bad_cols = np.flatnonzero(~np.isfinite(X).all(axis=0))
        if bad_cols.size:
            name = self.feature_schema[bad_cols[0]]
            raise SchemaMismatchError(f"feature '{name}' has missing or non-finite values", missing=[name])
        return X

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        """Label codes for rows whose columns follow ``feature_schema``."""
        return self.estimator.predict(self._check_matrix(X))

    def scores_matrix(self, X: np.ndarray) -> np.ndarray:
        return self.estimator.scores(self._check_matrix(X))

    def row_vector(self, row: Mapping[str, float]) -> np.ndarray:
        values = []
        for name in self.feature_schema:
            value = row.get(name)
            if value is None or not math.isfinite(float(value)):
                raise SchemaMismatchError(f"row is missing feature '{name}'", missing=[name])
            values.append(float(value))
        return np.asarray(values, dtype=np.float64).reshape(1, -1)

    def predict(self, row: Mapping[str, float]) -> LossLabel:
        return LossLabel.from_code(self.estimator.predict(self.row_vector(row))[0])

    def scores(self, row: Mapping[str, float]) -> Dict[str, float]:
        """Per-class scores (probabilities or vote shares) for one row."""
        s = self.estimator.scores(self.row_vector(row))[0]
        return {label: float(v) for label, v in zip(self.classes, s)}

    def check_schema(self, dataset: Dataset) -> None:
        active = dataset.active_features
        if tuple(active) != self.feature_schema:
            missing = [name for name in self.feature_schema if name not in active]
            unexpected = [name for name in active if name not in self.feature_schema]
            raise SchemaMismatchError("model feature schema does not match the dataset", missing, unexpected)

    def predict_dataset(self, dataset: Dataset, rows: Optional[np.ndarray] = None) -> np.ndarray:
        self.check_schema(dataset)
        return self.predict_matrix(dataset.active_matrix(rows))


def train_model(
    kind: str,
    dataset: Dataset,
    split: Optional[SplitIndices],
    params: Optional[Mapping[str, Any]] = None,
    seed: int = 1,
) -> TrainedModel:
    """Fit ``kind`` on the training side of ``split`` (all rows when split is None)."""
    kind = resolve_kind(kind)
    params = dict(params or {})
    active = dataset.active_features
    if not active:
        raise UsageError("no active features to train on")
    estimator = make_estimator(kind, params)
    rows = split.train_rows if split is not None else None
    y = dataset.labels(rows)
    if y.size == 0:
        raise UsageError("training side of the split is empty")
    estimator.fit(dataset.active_matrix(rows), y, seed=seed)
    resolved = dict(DEFAULT_PARAMS[kind])
    resolved.update(params)
    logger.debug("Trained %s on %d rows with %s", kind, y.size, resolved)
    return TrainedModel(
        kind=kind,
        params=resolved,
        feature_schema=tuple(active),
        estimator=estimator,
        train_meta={
            "seed": seed,
            "hyperparameters": resolved,
            "dataset_fingerprint": dataset.fingerprint(),
            "split": split.to_dict() if split is not None else None,
            "train_rows": int(y.size),
        },
    )


def train_decision_tree(dataset: Dataset, split: SplitIndices, params: Optional[Mapping[str, Any]] = None) -> TrainedModel:
    return train_model("decision_tree", dataset, split, params)


def train_random_forest(
    dataset: Dataset, split: SplitIndices, params: Optional[Mapping[str, Any]] = None, seed: int = 1
) -> TrainedModel:
    return train_model("random_forest", dataset, split, params, seed)


def train_gradient_boosting(
    dataset: Dataset, split: SplitIndices, params: Optional[Mapping[str, Any]] = None, seed: int = 1
) -> TrainedModel:
    return train_model("gradient_boosting", dataset, split, params, seed)


def train_logistic_regression(
    dataset: Dataset, split: SplitIndices, params: Optional[Mapping[str, Any]] = None
) -> TrainedModel:
    return train_model("logistic_regression", dataset, split, params)


def train_knn(dataset: Dataset, split: SplitIndices, params: Optional[Mapping[str, Any]] = None) -> TrainedModel:
    return train_model("knn", dataset, split, params)


class ModelLossClassifier:
    """Adapter that lets the simulator ask a trained model for a loss cause."""

    def __init__(self, model: TrainedModel):
        self.model = model

    def classify(self, context: LossContext) -> LossLabel:
        return self.model.predict(context.features)


def model_to_dict(model: TrainedModel) -> Dict[str, Any]:
    return {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "params": model.params,
        "feature_schema": list(model.feature_schema),
        "classes": list(model.classes),
        "train_meta": model.train_meta,
        "state": model.estimator.get_state(),
    }


def model_from_dict(data: Mapping[str, Any], source: Optional[Path] = None) -> TrainedModel:
    if not isinstance(data, Mapping) or data.get("format") != MODEL_FORMAT:
        raise InputParseError("not a model file", path=source)
    version = data.get("format_version")
    if not isinstance(version, int) or version > MODEL_FORMAT_VERSION:
        raise InputParseError(
            f"model format version {version!r} is not supported (this build reads up to {MODEL_FORMAT_VERSION})",
            path=source,
        )
    kind = data.get("kind")
    if kind not in ESTIMATORS:
        raise InputParseError(f"unknown model kind {kind!r}", path=source)
    if tuple(data.get("classes", ())) != LABELS:
        raise InputParseError(f"model classes {data.get('classes')} differ from {list(LABELS)}", path=source)
    try:
        estimator = make_estimator(kind, data["params"])
        estimator.set_state(data["state"])
        schema = tuple(data["feature_schema"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputParseError(f"malformed model file: {exc}", path=source) from None
    return TrainedModel(
        kind=kind,
        params=dict(data["params"]),
        feature_schema=schema,
        estimator=estimator,
        classes=LABELS,
        train_meta=dict(data.get("train_meta", {})),
    )


def save_model(model: TrainedModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model), allow_nan=False) + "\n", encoding="utf-8")
    logger.info("Saved %s model to %s", model.kind, path)
    return path


def load_model(path) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputParseError(f"malformed model file: {exc.msg}", path=path, offset=exc.pos) from None
    return model_from_dict(data, source=path)


def restrict_to_schema(dataset: Dataset, feature_schema: Sequence[str]) -> Dataset:
    """Mask every column the model does not read; missing columns are a schema error."""
    missing = [name for name in feature_schema if name not in dataset.feature_names]
    if missing:
        raise SchemaMismatchError("dataset lacks features the model reads", missing=missing)
    mask = [name in feature_schema for name in dataset.feature_names]
    restricted = Dataset(dataset.X, dataset.y, dataset.feature_names, mask)
    if restricted.active_features != tuple(feature_schema):
        raise SchemaMismatchError(
            f"model feature order {list(feature_schema)} differs from dataset order {list(restricted.active_features)}"
        )
    return restricted


__all__ = [
    "ESTIMATORS",
    "KIND_TITLES",
    "ModelLossClassifier",
    "TrainedModel",
    "load_model",
    "make_estimator",
    "model_from_dict",
    "model_to_dict",
    "resolve_kind",
    "restrict_to_schema",
    "save_model",
    "train_decision_tree",
    "train_gradient_boosting",
    "train_knn",
    "train_logistic_regression",
    "train_model",
    "train_random_forest",
]
