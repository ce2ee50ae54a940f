"""End-to-end tests of the command line."""

import json

import pytest

from app.core.features import CSV_COLUMNS, extract_features, load_dataset
from app.core.manifest import manifest_path, read_manifest
from app.core.sim.trace import load_trace
from cli.main import main
from config import ABLATION_ROWS, FEATURE_GROUPS, MODEL_KINDS, SCENARIOS

SMALL_CONFIG = """\
seed: 3
target_packets: 3000
wired_rate_mbps: 4.0
queue_capacity_pkts: 5
channel:
  variant: bernoulli
  p_loss: 0.01
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "small.yaml").write_text(SMALL_CONFIG)
    assert main(["simulate", "--config", str(root / "small.yaml"), "--out", str(root / "trace.ndz"), "--jobs", "1"]) == 0
    assert main(["extract", "--trace", str(root / "trace.ndz"), "--out", str(root / "data.csv")]) == 0
    assert main(
        ["train", "--kind", "dt", "--dataset", str(root / "data.csv"), "--out", str(root / "dt.json"), "--param", "max_depth=4"]
    ) == 0
    return root


def test_simulate_is_reproducible(workdir):
    again = workdir / "again.ndz"
    assert main(["simulate", "--config", str(workdir / "small.yaml"), "--out", str(again)]) == 0
    assert again.read_bytes() == (workdir / "trace.ndz").read_bytes()
    first, second = read_manifest(workdir / "trace.ndz"), read_manifest(again)
    assert first.outputs[str(workdir / "trace.ndz")] == second.outputs[str(again)]
    assert first.config["seed"] == 3
    assert str(workdir / "small.yaml") in first.inputs


def test_seed_flag_overrides_config(workdir):
    other = workdir / "other.ndz"
    assert main(["simulate", "--config", str(workdir / "small.yaml"), "--seed", "4", "--out", str(other)]) == 0
    assert other.read_bytes() != (workdir / "trace.ndz").read_bytes()


def test_missing_config_exits_2(workdir, capsys):
    code = main(["simulate", "--config", str(workdir / "absent.yaml"), "--out", str(workdir / "x.ndz")])
    assert code == 2
    assert "config not found" in capsys.readouterr().err
    assert not (workdir / "x.ndz").exists()


def test_existing_output_needs_force(workdir, capsys):
    args = ["extract", "--trace", str(workdir / "trace.ndz"), "--out", str(workdir / "data.csv")]
    assert main(args) == 2
    assert "--force" in capsys.readouterr().err
    assert main(args + ["--force"]) == 0


def test_unknown_kind_exits_2(workdir, capsys):
    code = main(["train", "--kind", "svm", "--dataset", str(workdir / "data.csv"), "--out", str(workdir / "svm.json")])
    assert code == 2
    assert "valid kinds" in capsys.readouterr().err


def test_malformed_trace_exits_3(workdir):
    bad = workdir / "bad.ndjson"
    bad.write_text('{"format": "lossnet-trace"\n')
    assert main(["extract", "--trace", str(bad), "--out", str(workdir / "bad.csv")]) == 3


def test_schema_mismatch_exits_4(workdir):
    lines = (workdir / "data.csv").read_text().splitlines()
    header = lines[0].split(",")
    drop = header.index("jitter_ms")
    trimmed = [",".join(v for i, v in enumerate(line.split(",")) if i != drop) for line in lines]
    (workdir / "nojitter.csv").write_text("\n".join(trimmed) + "\n")
    code = main(
        ["evaluate", "--model", str(workdir / "dt.json"), "--dataset", str(workdir / "nojitter.csv"), "--out", str(workdir / "r.json")]
    )
    assert code == 4


def test_evaluate_table_matches_render(workdir):
    report, table, rendered = workdir / "eval.json", workdir / "eval.txt", workdir / "render.txt"
    assert main(
        [
            "evaluate",
            "--model", str(workdir / "dt.json"),
            "--dataset", str(workdir / "data.csv"),
            "--out", str(report),
            "--table", str(table),
        ]
    ) == 0
    assert main(["render", "--report", str(report), "--out", str(rendered)]) == 0
    assert rendered.read_bytes() == table.read_bytes()
    text = table.read_text()
    for heading in ("Recall", "F1-Score", "Support Actual", "Support Pred", "Macro avg F1:", "Confusion Matrix"):
        assert heading in text
    data = json.loads(report.read_text())
    assert data["meta"]["split_seed"] == 1
    assert manifest_path(report).exists()


def test_train_with_grid_writes_cv_table(workdir):
    grid = workdir / "grid.yaml"
    grid.write_text("max_depth: [2, 4]\n")
    out = workdir / "dt_grid.json"
    assert main(
        ["train", "--kind", "dt", "--dataset", str(workdir / "data.csv"), "--out", str(out), "--grid", str(grid), "--folds", "3", "--jobs", "1"]
    ) == 0
    cv = (workdir / "dt_grid.json.cv.csv").read_text().splitlines()
    assert len(cv) == 3
    assert json.loads(out.read_text())["params"]["max_depth"] in (2, 4)


def test_replay_and_plot(workdir):
    out = workdir / "replay.json"
    assert main(
        ["replay-policy", "--config", str(workdir / "small.yaml"), "--packets", "800", "--out", str(out), "--jobs", "1"]
    ) == 0
    comparison = json.loads(out.read_text())
    assert comparison["format"] == "lossnet-policy-comparison"
    assert [o["policy"] for o in comparison["outcomes"]] == ["always_reduce", "oracle_discriminate"]
    series = workdir / "replay.series.csv"
    assert series.exists()
    png = workdir / "replay.png"
    assert main(["plot", "--series", str(series), "--trace", str(workdir / "trace.ndz"), "--out", str(png)]) == 0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_render_rejects_unknown_report(workdir):
    other = workdir / "other.json"
    other.write_text('{"format": "something"}')
    assert main(["render", "--report", str(other)]) == 2
    assert main(["render", "--report", str(workdir / "absent.json")]) == 3


def test_extract_honours_warmup(workdir):
    out = workdir / "warm.csv"
    assert main(["extract", "--trace", str(workdir / "trace.ndz"), "--out", str(out), "--warmup", "3"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    expected = extract_features(load_trace(workdir / "trace.ndz"), warmup=3)
    assert len(lines) - 1 == len(expected)
    assert len(expected) < len(load_dataset(workdir / "data.csv"))
    assert str(workdir / "trace.ndz") in read_manifest(out).inputs


@pytest.fixture(scope="module")
def small_params(workdir):
    path = workdir / "ablate_params.yaml"
    path.write_text("rf:\n  n_trees: 5\ngb:\n  n_stages: 5\n")
    return path


def test_ablate_default_grid(workdir, small_params):
    out = workdir / "ablation.json"
    args = ["ablate", "--dataset", str(workdir / "data.csv"), "--out", str(out), "--params", str(small_params)]
    assert main(args + ["--no-tune", "--jobs", "1"]) == 0
    report = json.loads(out.read_text())
    assert [row["row_id"] for row in report["rows"]] == [row_id for row_id, _, _ in ABLATION_ROWS]
    for row in report["rows"]:
        assert [cell["kind"] for cell in row["cells"]] == [kind for kind, _, _ in MODEL_KINDS]
    assert report["tuned"] == []
    assert report["params"]["random_forest"]["n_trees"] == 5


def test_ablate_models_flag_narrows_columns(workdir):
    out = workdir / "ablation_dt_knn.json"
    assert main(
        ["ablate", "--dataset", str(workdir / "data.csv"), "--out", str(out), "--models", "dt,knn", "--no-tune", "--jobs", "1"]
    ) == 0
    report = json.loads(out.read_text())
    assert report["kinds"] == ["decision_tree", "knn"]
    assert all(len(row["cells"]) == 2 for row in report["rows"])


def test_ablate_empty_mask_needs_allow_empty(workdir, capsys):
    out = workdir / "ablation_empty.json"
    args = [
        "ablate",
        "--dataset", str(workdir / "data.csv"),
        "--out", str(out),
        "--models", "dt",
        "--row", ",".join(FEATURE_GROUPS),
        "--no-tune",
        "--jobs", "1",
    ]
    assert main(args) == 2
    assert "--allow-empty" in capsys.readouterr().err
    assert not out.exists()
    assert main(args + ["--allow-empty"]) == 0
    row = json.loads(out.read_text())["rows"][0]
    assert row["removed_groups"] == list(FEATURE_GROUPS)
    assert row["cells"][0]["macro_recall"] == pytest.approx(1 / 3)


def test_compare_scenarios_writes_table_and_series(workdir):
    out = workdir / "scenarios.csv"
    assert main(["compare-scenarios", "--packets", "800", "--out", str(out), "--jobs", "1"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("scenario,mean_throughput_mbps")
    assert [line.split(",")[0] for line in lines[1:]] == list(SCENARIOS)
    assert (workdir / "scenarios.series.csv").exists()
