"""
Sweep controller.

A sweep is a list of independent cells (one N, one (s, t) pair, one
tolerance...). Cells run serially or on a process pool; results always come
back in cell order so the emitted tables do not depend on scheduling.
"""
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import structlog

logger = structlog.get_logger(__name__)

CellT = TypeVar("CellT")
ResultT = TypeVar("ResultT")


def default_workers() -> int:
    """Available parallelism of this process."""
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def run_sweep(
    func: Callable[[CellT], ResultT],
    cells: Sequence[CellT],
    workers: Optional[int] = None
) -> List[ResultT]:
    """
    Evaluate func on every cell.

    Args:
        func: Picklable module-level callable
        cells: Cell descriptions; results are returned in this order
        workers: Pool size; 1 runs in-process, None uses default_workers()

    Returns:
        One result per cell, in cell order

    Raises:
        ValueError: If workers < 1
    """
    if workers is None:
        workers = default_workers()
    if workers < 1:
        raise ValueError(f"Worker count must be >= 1, got {workers}")

    cells = list(cells)
    pool_size = min(workers, len(cells))
    logger.debug("Sweep started", cells=len(cells), workers=pool_size)

    if pool_size <= 1:
        return [func(cell) for cell in cells]

    # Executor.map yields in submission order
    with ProcessPoolExecutor(max_workers=pool_size) as pool:
        results = list(pool.map(func, cells))

    logger.debug("Sweep finished", cells=len(cells))
    return results
