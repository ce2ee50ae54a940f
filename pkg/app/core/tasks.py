"""Seed derivation and the process-pool task runner used by simulations, sweeps and training."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn

logger = logging.getLogger(__name__)

stderr_console = Console(stderr=True)


def format_time(seconds: float) -> str:
    """Wall-clock duration as ``12.34s``, ``3m 05.2s`` or ``1h 02m 03s``."""
    if seconds < 60:
        return f"{seconds:.2f}s"
    tenths = round(seconds * 10)
    if tenths < 36000:
        minutes, rest = divmod(tenths, 600)
        return f"{minutes}m {rest / 10:04.1f}s"
    hours, rest = divmod(round(seconds), 3600)
    minutes, secs = divmod(rest, 60)
    return f"{hours}h {minutes:02d}m {secs:02d}s"


def derive_seed(master_seed: int, index: int) -> int:
    """Independent 32-bit seed for subtask ``index`` of a run seeded with ``master_seed``."""
    return int(np.random.SeedSequence((master_seed, index)).generate_state(1)[0])


def _progress(console: Console) -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(complete_style="green", finished_style="green"),
        TaskProgressColumn(),
        console=console,
        transient=True,
    )


def run_tasks(
    fn: Callable[[Any], Any],
    items: Iterable[Any],
    jobs: int = 1,
    description: str = "Working",
    console: Optional[Console] = None,
) -> List[Any]:
    """Run ``fn`` over ``items`` and return the results in submission order.

    ``jobs == 1`` runs inline. Otherwise a process pool of ``jobs`` workers is
    used; ``fn`` and the items must then be picklable. The first failing
    task's exception propagates.
    """
    items: Sequence[Any] = list(items)
    if not items:
        return []
    console = console or stderr_console
    start_time = time.time()
    results: List[Any] = [None] * len(items)
    with _progress(console) as progress:
        task_id = progress.add_task(f"[cyan]{description}", total=len(items))
        if jobs <= 1 or len(items) == 1:
            for i, item in enumerate(items):
                results[i] = fn(item)
                progress.update(task_id, advance=1)
        else:
            with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as executor:
                futures = [executor.submit(fn, item) for item in items]
                for i, future in enumerate(futures):
                    results[i] = future.result()
                    progress.update(task_id, advance=1)
    logger.debug("%s: %d tasks in %s", description, len(items), format_time(time.time() - start_time))
    return results


__all__ = ["derive_seed", "format_time", "run_tasks", "stderr_console"]
