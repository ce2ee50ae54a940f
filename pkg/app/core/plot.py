"""Throughput and congestion-window plots."""

import logging
from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from app.core.errors import InputParseError  # noqa: E402

logger = logging.getLogger(__name__)

Series = Sequence[Tuple[float, float]]
SERIES_COLUMNS = ("name", "series", "time_s", "value")


def series_frame(named: Mapping[str, Tuple[Series, Series]]) -> pd.DataFrame:
    """Long-format table of (name, series, time_s, value); series is ``throughput`` or ``cwnd``."""
    records = []
    for name, (throughput, cwnd) in named.items():
        records.extend({"name": name, "series": "throughput", "time_s": t, "value": v} for t, v in throughput)
        records.extend({"name": name, "series": "cwnd", "time_s": t, "value": v} for t, v in cwnd)
    return pd.DataFrame.from_records(records, columns=list(SERIES_COLUMNS))


def save_series(named: Mapping[str, Tuple[Series, Series]], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    series_frame(named).to_csv(path, index=False, lineterminator="\n")
    return path


def load_series(path: Path) -> Dict[str, Tuple[Series, Series]]:
    path = Path(path)
    if not path.exists():
        raise InputParseError("series file not found", path=path)
    frame = pd.read_csv(path, float_precision="round_trip", dtype={"name": str, "series": str})
    if tuple(frame.columns) != SERIES_COLUMNS:
        raise InputParseError(f"series columns must be {', '.join(SERIES_COLUMNS)}", path=path)
    named: Dict[str, Tuple[Series, Series]] = {}
    for name, group in frame.groupby("name", sort=False):
        throughput = group[group["series"] == "throughput"]
        cwnd = group[group["series"] == "cwnd"]
        named[name] = (
            list(zip(throughput["time_s"].tolist(), throughput["value"].tolist())),
            list(zip(cwnd["time_s"].tolist(), cwnd["value"].tolist())),
        )
    return named


def plot_series(named: Mapping[str, Tuple[Series, Series]], path: Path, title: str = "") -> Path:
    """Throughput (top) and cWnd (bottom) against time, one line per name."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax_tp, ax_cwnd) = plt.subplots(2, 1, figsize=(10, 7), sharex=True)
    for name, (throughput, cwnd) in named.items():
        if throughput:
            t, v = zip(*throughput)
            ax_tp.plot(t, v, label=name, linewidth=1)
        if cwnd:
            t, v = zip(*cwnd)
            ax_cwnd.step(t, v, where="post", label=name, linewidth=1)
    ax_tp.set_ylabel("Throughput (Mbps)")
    ax_cwnd.set_ylabel("cWnd (segments)")
    ax_cwnd.set_xlabel("Time (s)")
    for ax in (ax_tp, ax_cwnd):
        ax.grid(True, alpha=0.3)
        if named:
            ax.legend(loc="upper right")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
    logger.info("Wrote plot to %s", path)
    return path


__all__ = ["load_series", "plot_series", "save_series", "series_frame"]
