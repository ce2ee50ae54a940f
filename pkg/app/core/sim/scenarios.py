"""Run one flow over several client paths and compare their throughput and cWnd."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Tuple

import numpy as np
import pandas as pd

from app.core.errors import ConfigError
from app.core.settings import SimConfig
from app.core.sim.engine import run_simulation
from app.core.sim.trace import Series
from app.core.tasks import derive_seed, run_tasks
from config import SCENARIOS

logger = logging.getLogger(__name__)


def scenario_configs(base: SimConfig, presets: Mapping[str, Mapping[str, Any]] = SCENARIOS) -> Dict[str, SimConfig]:
    """Apply each preset's overrides to ``base``; a preset ``channel`` replaces the base channel."""
    return {name: base.with_overrides(**dict(overrides)) for name, overrides in presets.items()}


@dataclass(frozen=True)
class _ScenarioRun:
    name: str
    index: int
    config: SimConfig


@dataclass
class ScenarioComparison:
    table: pd.DataFrame
    series: Dict[str, Tuple[Series, Series]] = field(default_factory=dict)


def _run_scenario(run: _ScenarioRun) -> Dict[str, Any]:
    trace = run_simulation(run.config)
    return {
        "scenario": run.name,
        "index": run.index,
        "seed": run.config.seed,
        "mean_throughput_mbps": trace.stats.mean_throughput_mbps,
        "qdrop_pct": trace.summary.qdrop_pct,
        "wdrop_pct": trace.summary.wdrop_pct,
        "loss_events": trace.stats.loss_events,
        "reductions": trace.stats.reductions,
        "mean_cwnd_segments": float(np.mean([v for _, v in trace.cwnd_series])) if trace.cwnd_series else 0.0,
        "throughput_series": trace.throughput_series,
        "cwnd_series": trace.cwnd_series,
    }


def compare_scenarios(
    configs: Mapping[str, SimConfig],
    n_seeds: int = 1,
    master_seed: int = 1,
    jobs: int = 1,
) -> ScenarioComparison:
    """Mean per-scenario metrics over ``n_seeds`` seeds, in the given scenario order.

    Every scenario runs with the same derived seeds. The series kept for
    plotting come from the first seed.
    """
    if not configs:
        raise ConfigError("no scenarios to compare")
    if n_seeds < 1:
        raise ConfigError(f"n_seeds must be at least 1, got {n_seeds}")
    seeds = [derive_seed(master_seed, i) for i in range(n_seeds)]
    runs: List[_ScenarioRun] = [
        _ScenarioRun(name, i, config.with_overrides(seed=seed))
        for name, config in configs.items()
        for i, seed in enumerate(seeds)
    ]
    results = run_tasks(_run_scenario, runs, jobs=jobs, description="Scenarios")

    series = {r["scenario"]: (r["throughput_series"], r["cwnd_series"]) for r in results if r["index"] == 0}
    frame = pd.DataFrame.from_records(
        [{k: v for k, v in r.items() if not k.endswith("_series")} for r in results]
    )
    grouped = frame.groupby("scenario", sort=False)
    table = pd.DataFrame(
        {
            "scenario": list(configs),
            "mean_throughput_mbps": grouped["mean_throughput_mbps"].mean().reindex(list(configs)).to_numpy(),
            "throughput_std": grouped["mean_throughput_mbps"].std(ddof=0).reindex(list(configs)).to_numpy(),
            "mean_cwnd_segments": grouped["mean_cwnd_segments"].mean().reindex(list(configs)).to_numpy(),
            "qdrop_pct": grouped["qdrop_pct"].mean().reindex(list(configs)).to_numpy(),
            "wdrop_pct": grouped["wdrop_pct"].mean().reindex(list(configs)).to_numpy(),
            "loss_events": grouped["loss_events"].mean().reindex(list(configs)).to_numpy(),
            "reductions": grouped["reductions"].mean().reindex(list(configs)).to_numpy(),
        }
    )
    for row in table.itertuples(index=False):
        logger.info(
            "%s: %.3f Mbps, qDrop %.2f%%, wDrop %.2f%%",
            row.scenario,
            row.mean_throughput_mbps,
            row.qdrop_pct,
            row.wdrop_pct,
        )
    return ScenarioComparison(table=table, series=series)


__all__ = ["ScenarioComparison", "compare_scenarios", "scenario_configs"]
