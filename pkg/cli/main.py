#!/usr/bin/env python3
"""lossnet command line: simulate, extract, train, evaluate, ablate, replay-policy, compare-scenarios and helpers."""

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml
from rich.logging import RichHandler
from rich.markup import escape
from rich.panel import Panel

from app.core.errors import ConfigError, InputParseError, LossnetError, UsageError
from app.core.eval.ablation import AblationReport, run_ablation
from app.core.eval.report import EvalReport, evaluate, load_report, save_report
from app.core.features import DEFAULT_WARMUP, class_summary, extract_features, load_dataset, save_dataset
from app.core.manifest import RunManifest, ensure_writable, write_manifest
from app.core.ml.model import load_model, resolve_kind, restrict_to_schema, save_model, train_model
from app.core.ml.search import grid_search, save_cv_table
from app.core.ml.split import SPLIT_MODES, stratified_split
from app.core.plot import load_series, plot_series, save_series
from app.core.report.renderer import ReportRenderer
from app.core.settings import SimConfig, apply_overrides, load_sim_config
from app.core.sim.calibrate import calibrate_sweep, save_sweep
from app.core.sim.engine import run_simulation
from app.core.sim.replay import replay_policy
from app.core.sim.scenarios import compare_scenarios, scenario_configs
from app.core.sim.trace import load_trace, save_trace
from app.core.tasks import format_time, stderr_console
from config import ABLATION_ROWS, DEFAULT_GRIDS, DEFAULT_JOBS, FEATURE_GROUPS, LOG_LEVEL, POLICY_NAMES, TOOL_VERSION

logger = logging.getLogger("lossnet")

console = stderr_console


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else LOG_LEVEL,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True)],
        force=True,
    )


def _csv_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _new_manifest(args: argparse.Namespace, argv: Sequence[str]) -> RunManifest:
    return RunManifest(command=args.command, argv=list(argv))


def _finish(manifest: RunManifest, started: float, artifacts: Sequence[Path], primary: Path) -> None:
    for path in artifacts:
        manifest.add_output(path)
    manifest.duration_s = round(time.time() - started, 3)
    write_manifest(manifest, primary)
    console.print(
        Panel.fit(
            "\n".join(str(p) for p in artifacts) + f"\nTime: {format_time(manifest.duration_s)}",
            title=f"{manifest.command} done",
            border_style="green",
        )
    )


def _load_config(args: argparse.Namespace, manifest: RunManifest) -> SimConfig:
    config = load_sim_config(args.config, args.set)
    changes: Dict[str, Any] = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "packets", None) is not None:
        changes["target_packets"] = args.packets
    if getattr(args, "duration", None) is not None:
        changes["duration_s"] = args.duration
    if changes:
        config = config.with_overrides(**changes)
    manifest.config_path = str(args.config) if args.config else None
    manifest.config = config.model_dump(mode="json")
    manifest.seeds = {"seed": config.seed}
    if args.config:
        manifest.add_input(args.config)
    return config


def _print_text(text: str) -> None:
    console.print(text, markup=False, highlight=False, end="")


def cmd_simulate(args, manifest: RunManifest) -> List[Path]:
    out = ensure_writable(args.out, args.force)
    config = _load_config(args, manifest)
    trace = run_simulation(config)
    save_trace(trace, out)
    _print_text(ReportRenderer().trace_summary(trace.summary))
    return [out]


def cmd_extract(args, manifest: RunManifest) -> List[Path]:
    out = ensure_writable(args.out, args.force)
    trace = load_trace(args.trace)
    manifest.add_input(args.trace)
    dataset = extract_features(trace, warmup=args.warmup)
    save_dataset(dataset, out)
    summary = class_summary(dataset)
    logger.info(
        "%d rows: %s",
        summary.total,
        ", ".join(f"{label} {count} ({summary.percent(label):.2f}%)" for label, count in summary.counts.items()),
    )
    return [out]


def _explicit_params(args) -> Dict[str, Any]:
    params = apply_overrides({}, args.param or [])
    if args.k is not None:
        if resolve_kind(args.kind) != "knn":
            raise UsageError("--k applies to --kind knn only")
        params["k"] = args.k
    return params


def _read_mapping(path: Path, what: str) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    try:
        loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {what} {path}: {exc}") from None
    if not isinstance(loaded, dict):
        raise ConfigError(f"{what} {path} must be a key/value mapping")
    return loaded


def _load_grid(path: Optional[Path], kind: str) -> Dict[str, List[Any]]:
    if path is None:
        return DEFAULT_GRIDS[kind]
    return _read_mapping(path, "grid file")


def cmd_train(args, manifest: RunManifest) -> List[Path]:
    kind = resolve_kind(args.kind)
    out = ensure_writable(args.out, args.force)
    dataset = load_dataset(args.dataset)
    manifest.add_input(args.dataset)
    if args.drop:
        dataset = dataset.without(args.drop)
    split = stratified_split(dataset, args.train_fraction, args.seed, args.split_mode)
    manifest.seeds = {"seed": args.seed, "split_seed": args.seed}
    params = _explicit_params(args)
    artifacts = []
    if not params:
        grid = _load_grid(args.grid, kind)
        if args.grid:
            manifest.add_input(args.grid)
        result = grid_search(kind, grid, dataset, split, args.folds, args.seed, args.jobs)
        params = result.best_params
        cv_path = ensure_writable(args.cv_table or out.with_name(out.name + ".cv.csv"), args.force)
        artifacts.append(save_cv_table(result, cv_path))
    model = train_model(kind, dataset, split, params, seed=args.seed)
    save_model(model, out)
    return [out] + artifacts


def cmd_evaluate(args, manifest: RunManifest) -> List[Path]:
    out = ensure_writable(args.out, args.force)
    model = load_model(args.model)
    dataset = restrict_to_schema(load_dataset(args.dataset), model.feature_schema)
    manifest.add_input(args.model)
    manifest.add_input(args.dataset)
    trained_split = model.train_meta.get("split") or {}
    split = stratified_split(
        dataset,
        args.train_fraction if args.train_fraction is not None else trained_split.get("train_fraction", 0.8),
        args.split_seed if args.split_seed is not None else trained_split.get("seed", 1),
        args.split_mode or trained_split.get("mode", "stratified"),
    )
    manifest.seeds = {"split_seed": split.seed, "train_seed": model.train_meta.get("seed")}
    report = evaluate(model, dataset, split)
    save_report(report, out)
    text = ReportRenderer().eval_report(report)
    _print_text(text)
    artifacts = [out]
    if args.table:
        table = ensure_writable(args.table, args.force)
        table.write_text(text, encoding="utf-8")
        artifacts.append(table)
    return artifacts


def _feature_sets(specs: Optional[List[List[str]]]):
    """``--row`` values to ablation rows; an empty value is the all-features row."""
    if not specs:
        return tuple(ABLATION_ROWS)
    rows = []
    for groups in specs:
        if not groups:
            rows.append(("all", "All included", ()))
        else:
            rows.append(("_".join(groups), " + ".join(groups), tuple(groups)))
    return rows


def cmd_ablate(args, manifest: RunManifest) -> List[Path]:
    out = ensure_writable(args.out, args.force)
    dataset = load_dataset(args.dataset)
    manifest.add_input(args.dataset)
    kinds = [resolve_kind(k) for k in args.models] if args.models else None
    params: Dict[str, Dict[str, Any]] = {}
    if args.params:
        loaded = _read_mapping(args.params, "params file")
        manifest.add_input(args.params)
        params.update({resolve_kind(k): dict(v or {}) for k, v in loaded.items()})
    for path in args.model or []:
        model = load_model(path)
        manifest.add_input(path)
        params[model.kind] = dict(model.params)
    if kinds is not None:
        params = {k: v for k, v in params.items() if k in kinds}
    grids = None
    if args.grid:
        grids = _read_mapping(args.grid, "grid file")
        manifest.add_input(args.grid)
    manifest.seeds = {"seeds": args.seeds}
    report = run_ablation(
        dataset,
        kinds=kinds,
        feature_sets=_feature_sets(args.row),
        seeds=args.seeds,
        params=params or None,
        jobs=args.jobs,
        train_fraction=args.train_fraction,
        split_mode=args.split_mode,
        tune=not args.no_tune,
        grids=grids,
        folds=args.folds,
        allow_empty=args.allow_empty,
    )
    save_report(report, out)
    text = ReportRenderer().ablation(report)
    _print_text(text)
    artifacts = [out]
    if args.grid_csv:
        grid_path = ensure_writable(args.grid_csv, args.force)
        report.to_frame().to_csv(grid_path, index=False, lineterminator="\n")
        artifacts.append(grid_path)
    return artifacts


def cmd_replay_policy(args, manifest: RunManifest) -> List[Path]:
    out = ensure_writable(args.out, args.force)
    series_path = ensure_writable(args.series or out.with_name(out.stem + ".series.csv"), args.force)
    config = _load_config(args, manifest)
    if args.model:
        manifest.add_input(args.model)
    outcomes = replay_policy(config, args.policies, model_path=str(args.model) if args.model else None, jobs=args.jobs)
    renderer = ReportRenderer()
    comparison = {
        "format": "lossnet-policy-comparison",
        "format_version": 1,
        "seed": config.seed,
        "outcomes": [
            {k: v for k, v in asdict(o).items() if k not in ("cwnd_series", "throughput_series")} for o in outcomes
        ],
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(comparison, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    save_series({o.policy: (o.throughput_series, o.cwnd_series) for o in outcomes}, series_path)
    _print_text(renderer.policy_comparison(outcomes))
    return [out, series_path]


def _parse_scenarios(specs: Optional[List[str]], base: SimConfig, manifest: RunManifest) -> Dict[str, SimConfig]:
    if not specs:
        return scenario_configs(base)
    configs: Dict[str, SimConfig] = {}
    for spec in specs:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--scenario expects NAME=CONFIG.yaml, got '{spec}'")
        configs[name] = load_sim_config(Path(path)).with_overrides(
            target_packets=base.target_packets, duration_s=base.duration_s
        )
        manifest.add_input(Path(path))
    return configs


def cmd_compare_scenarios(args, manifest: RunManifest) -> List[Path]:
    out = ensure_writable(args.out, args.force)
    series_path = ensure_writable(args.series or out.with_name(out.stem + ".series.csv"), args.force)
    base = _load_config(args, manifest)
    configs = _parse_scenarios(args.scenario, base, manifest)
    manifest.seeds = {"master_seed": base.seed, "n_seeds": args.n_seeds}
    comparison = compare_scenarios(configs, n_seeds=args.n_seeds, master_seed=base.seed, jobs=args.jobs)
    out.parent.mkdir(parents=True, exist_ok=True)
    comparison.table.to_csv(out, index=False, lineterminator="\n")
    save_series(comparison.series, series_path)
    _print_text(ReportRenderer().scenario_comparison(comparison.table))
    artifacts = [out, series_path]
    if args.plot:
        plot_path = ensure_writable(args.plot, args.force)
        plot_series(comparison.series, plot_path, title=args.title)
        artifacts.append(plot_path)
    return artifacts


def cmd_calibrate(args, manifest: RunManifest) -> List[Path]:
    out = ensure_writable(args.out, args.force)
    config = _load_config(args, manifest)
    manifest.seeds = {"master_seed": config.seed, "n_seeds": args.n_seeds}
    table = calibrate_sweep(
        config,
        queue_capacities=args.queues or [config.queue_capacity_pkts],
        rates_mbps=args.rates or [config.wired_rate_mbps],
        stationary_losses=args.losses or [config.channel.stationary_loss()],
        n_seeds=args.n_seeds,
        master_seed=config.seed,
        jobs=args.jobs,
    )
    save_sweep(table, out)
    return [out]


def cmd_plot(args, manifest: RunManifest) -> List[Path]:
    out = ensure_writable(args.out, args.force)
    named = {}
    if args.series:
        named.update(load_series(args.series))
        manifest.add_input(args.series)
    for path in args.trace or []:
        trace = load_trace(path)
        manifest.add_input(path)
        named[Path(path).name] = (trace.throughput_series, trace.cwnd_series)
    if not named:
        raise UsageError("nothing to plot: pass --trace and/or --series")
    plot_series(named, out, title=args.title)
    return [out]


def cmd_render(args, manifest: RunManifest) -> List[Path]:
    path = Path(args.report)
    if not path.exists():
        raise InputParseError("report not found", path=path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputParseError(f"malformed report: {exc.msg}", path=path, offset=exc.pos) from None
    fmt = raw.get("format") if isinstance(raw, dict) else None
    renderer = ReportRenderer()
    if fmt == "lossnet-eval":
        text = renderer.eval_report(load_report(args.report, EvalReport))
    elif fmt == "lossnet-ablation":
        text = renderer.ablation(load_report(args.report, AblationReport))
    else:
        raise UsageError(f"{args.report} is not an evaluation or ablation report")
    if not args.out:
        sys.stdout.write(text)
        return []
    out = ensure_writable(args.out, args.force)
    out.write_text(text, encoding="utf-8")
    return [out]


COMMANDS = {
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "replay-policy": cmd_replay_policy,
    "compare-scenarios": cmd_compare_scenarios,
    "calibrate": cmd_calibrate,
    "plot": cmd_plot,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--force", action="store_true", help="Overwrite existing outputs")
    common.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help=f"Worker processes (default: {DEFAULT_JOBS})")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--config", type=Path, help="YAML simulation config (default: built-in defaults)")
    sim.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a config key, e.g. channel.p_bad=0.2")
    sim.add_argument("--seed", type=int, help="Simulation seed (overrides the config)")

    split = argparse.ArgumentParser(add_help=False)
    split.add_argument("--split-mode", choices=SPLIT_MODES, default="stratified", help="Train/test split mode")
    split.add_argument("--train-fraction", type=float, default=0.8, help="Training share of each class (default: 0.8)")

    parser = argparse.ArgumentParser(prog="lossnet", description="Packet-loss cause datasets, classifiers and policy replay")
    parser.add_argument("--version", action="version", version=f"lossnet {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, sim], help="Run one flow and write its labeled trace")
    p.add_argument("--out", type=Path, required=True, help="Trace file (.ndjson, or .ndz/.gz for gzip)")
    p.add_argument("--packets", type=int, help="Stop after this many acknowledged segments")
    p.add_argument("--duration", type=float, help="Stop after this many simulated seconds")

    p = sub.add_parser("extract", parents=[common], help="Turn a trace into a feature dataset CSV")
    p.add_argument("--trace", type=Path, required=True, help="Trace file")
    p.add_argument("--out", type=Path, required=True, help="Dataset CSV")
    p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP, help=f"Leading packets to skip (default: {DEFAULT_WARMUP})")

    p = sub.add_parser("train", parents=[common, split], help="Train a classifier, grid-searching unless parameters are given")
    p.add_argument("--kind", required=True, help="Model kind: rf, knn, gb, lr, dt (or full id)")
    p.add_argument("--dataset", type=Path, required=True, help="Dataset CSV")
    p.add_argument("--out", type=Path, required=True, help="Model file")
    p.add_argument("--seed", type=int, default=1, help="Split and training seed (default: 1)")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="Explicit hyperparameter; skips grid search")
    p.add_argument("--k", type=int, help="Neighbour count for knn; skips grid search")
    p.add_argument("--grid", type=Path, help="YAML grid (parameter -> list of values)")
    p.add_argument("--folds", type=int, default=5, help="Cross-validation folds (default: 5)")
    p.add_argument("--cv-table", type=Path, help="CV table CSV (default: <out>.cv.csv)")
    p.add_argument("--drop", type=_csv_list, default=[], help=f"Feature groups to mask: {', '.join(FEATURE_GROUPS)}")

    p = sub.add_parser("evaluate", parents=[common], help="Score a model on the test side of a split")
    p.add_argument("--model", type=Path, required=True, help="Model file")
    p.add_argument("--dataset", type=Path, required=True, help="Dataset CSV")
    p.add_argument("--out", type=Path, required=True, help="Evaluation report JSON")
    p.add_argument("--split-seed", type=int, help="Split seed (default: the seed the model was trained with)")
    p.add_argument("--split-mode", choices=SPLIT_MODES, help="Split mode (default: as trained)")
    p.add_argument("--train-fraction", type=float, help="Training share (default: as trained)")
    p.add_argument("--table", type=Path, help="Also write the rendered table here")

    p = sub.add_parser("ablate", parents=[common, split], help="Retrain every model with feature groups removed")
    p.add_argument("--dataset", type=Path, required=True, help="Dataset CSV")
    p.add_argument("--out", type=Path, required=True, help="Ablation report JSON")
    p.add_argument("--models", type=_csv_list, help="Model kinds, comma separated (default: all five)")
    p.add_argument("--seeds", type=_int_list, default=[1], help="Split/training seeds, comma separated (default: 1)")
    p.add_argument("--params", type=Path, help="YAML mapping model kind -> hyperparameters")
    p.add_argument("--model", type=Path, action="append", help="Reuse the hyperparameters of a trained model file")
    p.add_argument("--grid-csv", type=Path, help="Also write the per-seed grid as CSV")
    p.add_argument(
        "--row",
        type=_csv_list,
        action="append",
        metavar="GROUPS",
        help=f"Ablation row removing these comma-separated groups ({', '.join(FEATURE_GROUPS)}); repeatable, '' keeps all",
    )
    p.add_argument("--grid", type=Path, help="YAML mapping model kind -> grid, searched on the all-features dataset")
    p.add_argument("--folds", type=int, default=5, help="Cross-validation folds for tuning (default: 5)")
    p.add_argument("--no-tune", action="store_true", help="Skip grid search and use the built-in defaults")
    p.add_argument("--allow-empty", action="store_true", help="Score rows that remove every feature as a majority-class baseline")

    p = sub.add_parser("replay-policy", parents=[common, sim], help="Run the same flow under several loss-reaction policies")
    p.add_argument(
        "--policies",
        type=_csv_list,
        default=[name for name, _ in POLICY_NAMES[:2]],
        help=f"Comma separated: {', '.join(name for name, _ in POLICY_NAMES)}",
    )
    p.add_argument("--model", type=Path, help="Model file for model-discriminate")
    p.add_argument("--out", type=Path, required=True, help="Comparison JSON")
    p.add_argument("--series", type=Path, help="Throughput/cWnd series CSV (default: <out stem>.series.csv)")
    p.add_argument("--packets", type=int, help="Stop after this many acknowledged segments")
    p.add_argument("--duration", type=float, help="Stop after this many simulated seconds")

    p = sub.add_parser(
        "compare-scenarios", parents=[common, sim], help="Run the flow over wired, stationary and mobile wireless clients"
    )
    p.add_argument(
        "--scenario",
        action="append",
        metavar="NAME=CONFIG",
        help="Scenario config file (repeatable; default: the built-in wired/stationary/mobile presets over --config)",
    )
    p.add_argument("--out", type=Path, required=True, help="Comparison table CSV")
    p.add_argument("--series", type=Path, help="Throughput/cWnd series CSV (default: <out stem>.series.csv)")
    p.add_argument("--plot", type=Path, help="Also plot the series to this PNG")
    p.add_argument("--title", default="", help="Figure title")
    p.add_argument("--n-seeds", type=int, default=1, help="Runs per scenario (default: 1)")
    p.add_argument("--packets", type=int, help="Stop each run after this many acknowledged segments")
    p.add_argument("--duration", type=float, help="Stop each run after this many simulated seconds")

    p = sub.add_parser("calibrate", parents=[common, sim], help="Sweep queue, rate and loss against the drop-mix targets")
    p.add_argument("--out", type=Path, required=True, help="Sweep table CSV")
    p.add_argument("--queues", type=_int_list, help="Queue capacities in packets")
    p.add_argument("--rates", type=_float_list, help="Bottleneck rates in Mbps")
    p.add_argument("--losses", type=_float_list, help="Channel stationary loss probabilities")
    p.add_argument("--n-seeds", type=int, default=5, help="Runs per grid point (default: 5)")
    p.add_argument("--packets", type=int, help="Stop each run after this many acknowledged segments")
    p.add_argument("--duration", type=float, help="Stop each run after this many simulated seconds")

    p = sub.add_parser("plot", parents=[common], help="Plot throughput and cWnd series to PNG")
    p.add_argument("--trace", type=Path, action="append", help="Trace file (repeatable)")
    p.add_argument("--series", type=Path, help="Series CSV written by replay-policy")
    p.add_argument("--out", type=Path, required=True, help="PNG file")
    p.add_argument("--title", default="", help="Figure title")

    p = sub.add_parser("render", parents=[common], help="Render a saved evaluation or ablation report as text")
    p.add_argument("--report", type=Path, required=True, help="Report JSON")
    p.add_argument("--out", type=Path, help="Text file (default: standard output)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    manifest = _new_manifest(args, argv)
    started = time.time()
    try:
        artifacts = COMMANDS[args.command](args, manifest)
        if artifacts:
            _finish(manifest, started, artifacts, artifacts[0])
        return 0
    except LossnetError as e:
        console.print(f"[red]Error: {escape(str(e))}[/red]", highlight=False)
        return e.exit_code
    except Exception:
        logger.exception("Unexpected error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
