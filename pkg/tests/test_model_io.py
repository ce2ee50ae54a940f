"""Tests for trained models and the model file format."""

import json

import numpy as np
import pytest

from app.core.errors import ConfigError, InputParseError, SchemaMismatchError, UsageError
from app.core.labels import LossLabel
from app.core.ml.model import (
    ModelLossClassifier,
    load_model,
    model_to_dict,
    resolve_kind,
    restrict_to_schema,
    save_model,
    train_model,
)
from app.core.ml.split import stratified_split
from tests.conftest import blobs

SMALL_PARAMS = {
    "decision_tree": {"max_depth": 6},
    "random_forest": {"n_trees": 5, "max_depth": 6},
    "gradient_boosting": {"n_stages": 5},
    "logistic_regression": {"iterations": 100},
    "knn": {"k": 3},
}


@pytest.mark.parametrize("kind", sorted(SMALL_PARAMS))
def test_saved_model_predicts_identically(kind, tmp_path):
    dataset = blobs(n_per_class=400, seed=4)
    split = stratified_split(dataset, seed=2)
    model = train_model(kind, dataset, split, SMALL_PARAMS[kind], seed=3)
    path = save_model(model, tmp_path / f"{kind}.json")
    loaded = load_model(path)
    assert loaded.kind == kind
    assert loaded.feature_schema == model.feature_schema
    assert loaded.train_meta["split"]["seed"] == 2
    assert np.array_equal(loaded.predict_dataset(dataset), model.predict_dataset(dataset))
    assert len(dataset) >= 1000


def test_single_row_predict_and_scores(blob_dataset):
    model = train_model("knn", blob_dataset, None, {"k": 1})
    row = dict(zip(blob_dataset.feature_names, blob_dataset.X[0]))
    assert model.predict(row) is LossLabel.from_code(blob_dataset.y[0])
    scores = model.scores(row)
    assert list(scores) == ["qDrop", "wDrop", "unDrop"]
    assert sum(scores.values()) == pytest.approx(1.0)


def test_newer_format_version_rejected(blob_dataset, tmp_path):
    model = train_model("dt", blob_dataset, None, {"max_depth": 2})
    data = model_to_dict(model)
    data["format_version"] = 99
    path = tmp_path / "future.json"
    path.write_text(json.dumps(data))
    with pytest.raises(InputParseError, match="format version"):
        load_model(path)


def test_missing_feature_in_row(blob_dataset):
    model = train_model("dt", blob_dataset, None, {"max_depth": 2})
    row = dict(zip(blob_dataset.feature_names, blob_dataset.X[0]))
    del row["jitter_ms"]
    with pytest.raises(SchemaMismatchError) as err:
        model.predict(row)
    assert err.value.missing == ("jitter_ms",)


def test_dataset_schema_must_match(blob_dataset):
    model = train_model("dt", blob_dataset.without(["cwnd"]), None, {"max_depth": 2})
    assert "cwnd_segments" not in model.feature_schema
    with pytest.raises(SchemaMismatchError, match="unexpected: cwnd_segments"):
        model.predict_dataset(blob_dataset)
    restricted = restrict_to_schema(blob_dataset, model.feature_schema)
    assert restricted.active_features == model.feature_schema
    assert model.predict_dataset(restricted).shape == (len(blob_dataset),)


def test_unknown_kind_lists_valid_kinds():
    with pytest.raises(UsageError) as err:
        resolve_kind("svm")
    message = str(err.value)
    for alias in ("rf", "knn", "gb", "lr", "dt"):
        assert alias in message
    assert resolve_kind("gb") == "gradient_boosting"


def test_missing_or_malformed_model_file(tmp_path):
    with pytest.raises(ConfigError):
        load_model(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputParseError):
        load_model(bad)
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(InputParseError, match="not a model file"):
        load_model(wrong)


def test_loss_classifier_adapter(blob_dataset):
    from app.core.sim.engine import LossContext

    model = train_model("dt", blob_dataset, None)
    features = dict(zip(blob_dataset.feature_names, blob_dataset.X[-1]))
    context = LossContext(seq=0, send_time_s=0.0, features=features)
    assert ModelLossClassifier(model).classify(context) is LossLabel.from_code(blob_dataset.y[-1])
