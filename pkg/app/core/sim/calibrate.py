"""Calibration sweep: find topology and channel settings that give a target drop mix."""

import itertools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from app.core.errors import ConfigError
from app.core.settings import SimConfig
from app.core.sim.engine import run_simulation
from app.core.tasks import derive_seed, run_tasks
from config import CALIBRATION_TARGETS, CALIBRATION_TOLERANCE_PP

logger = logging.getLogger(__name__)


def with_stationary_loss(config: SimConfig, loss: float) -> SimConfig:
    """Copy of ``config`` whose channel has long-run loss ``loss``.

    Bernoulli sets ``p_loss``. Gilbert-Elliott keeps the Bad-state loss and
    the transition probabilities and solves for the Good-state loss.
    """
    channel = config.channel
    if channel.variant == "bernoulli":
        return config.with_overrides(channel={**channel.model_dump(), "p_loss": loss})
    pi_bad = channel.bad_state_share()
    if pi_bad >= 1.0:
        raise ConfigError("Gilbert-Elliott channel never leaves the Bad state; cannot set its stationary loss")
    p_good = (loss - pi_bad * channel.p_bad) / (1.0 - pi_bad)
    if p_good < 0.0:
        raise ConfigError(
            f"stationary loss {loss} is below the Bad-state contribution {pi_bad * channel.p_bad:.5f}"
        )
    return config.with_overrides(channel={**channel.model_dump(), "p_good": p_good})


@dataclass(frozen=True)
class _SweepRun:
    point: int
    config: SimConfig


def _run_point(run: _SweepRun) -> Dict[str, float]:
    trace = run_simulation(run.config)
    return {
        "point": run.point,
        "seed": run.config.seed,
        "qdrop_pct": trace.summary.qdrop_pct,
        "wdrop_pct": trace.summary.wdrop_pct,
        "mean_throughput_mbps": trace.stats.mean_throughput_mbps,
    }


def calibrate_sweep(
    base: SimConfig,
    queue_capacities: Sequence[int],
    rates_mbps: Sequence[float],
    stationary_losses: Sequence[float],
    n_seeds: int = 5,
    master_seed: int = 1,
    jobs: int = 1,
    targets: Dict[str, float] = CALIBRATION_TARGETS,
    tolerance_pp: float = CALIBRATION_TOLERANCE_PP,
) -> pd.DataFrame:
    """Mean drop percentages per grid point, closest to the targets first."""
    points = list(itertools.product(queue_capacities, rates_mbps, stationary_losses))
    if not points:
        raise ConfigError("calibration grid is empty")
    seeds = [derive_seed(master_seed, i) for i in range(n_seeds)]
    runs: List[_SweepRun] = []
    for p, (queue, rate, loss) in enumerate(points):
        config = with_stationary_loss(base, loss).with_overrides(queue_capacity_pkts=queue, wired_rate_mbps=rate)
        runs.extend(_SweepRun(p, config.with_overrides(seed=seed)) for seed in seeds)
    results = pd.DataFrame.from_records(run_tasks(_run_point, runs, jobs=jobs, description="Calibration sweep"))

    grouped = results.groupby("point", sort=True)
    table = pd.DataFrame(
        {
            "queue_capacity_pkts": [q for q, _, _ in points],
            "wired_rate_mbps": [r for _, r, _ in points],
            "stationary_loss": [l for _, _, l in points],
            "qdrop_pct": grouped["qdrop_pct"].mean().to_numpy(),
            "wdrop_pct": grouped["wdrop_pct"].mean().to_numpy(),
            "qdrop_pct_std": grouped["qdrop_pct"].std(ddof=0).to_numpy(),
            "wdrop_pct_std": grouped["wdrop_pct"].std(ddof=0).to_numpy(),
            "mean_throughput_mbps": grouped["mean_throughput_mbps"].mean().to_numpy(),
        }
    )
    dq = table["qdrop_pct"] - targets["qDrop"]
    dw = table["wdrop_pct"] - targets["wDrop"]
    table["distance_pp"] = np.hypot(dq, dw)
    table["within_tolerance"] = (dq.abs() <= tolerance_pp) & (dw.abs() <= tolerance_pp)
    table = table.sort_values("distance_pp", kind="stable").reset_index(drop=True)
    best = table.iloc[0]
    logger.info(
        "Best point: queue=%d rate=%.2f loss=%.4f -> qDrop %.3f%% wDrop %.3f%% (distance %.3f pp)",
        best["queue_capacity_pkts"],
        best["wired_rate_mbps"],
        best["stationary_loss"],
        best["qdrop_pct"],
        best["wdrop_pct"],
        best["distance_pp"],
    )
    return table


def save_sweep(table: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, lineterminator="\n")
    return path


def wilson_interval(successes: int, trials: int, z: float = 2.5758293035489) -> tuple:
    """Wilson score interval; the default z gives 99% coverage."""
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (centre - half, centre + half)


__all__ = ["calibrate_sweep", "save_sweep", "wilson_interval", "with_stationary_loss"]
