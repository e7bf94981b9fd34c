"""Deterministic Parallel Map

Each task derives its own seed from (master_seed, index), so a task's
result does not depend on which worker ran it or in what order.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix_seed(master_seed: int, index: int) -> int:
    """64-bit seed for task `index` under `master_seed`"""
    return _splitmix64(_splitmix64(master_seed & _MASK64) ^ (index & _MASK64))


def resolve_threads(threads: Optional[int]) -> int:
    """Worker count; None means machine parallelism"""
    if threads is None:
        return os.cpu_count() or 1
    return max(1, int(threads))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = 1) -> List[R]:
    """Order-preserving map over items

    Args:
        fn: picklable callable (module-level function or functools.partial of one)
        items: task arguments
        threads: worker processes; 1 runs in-process, None uses all cores

    Returns:
        Results in the order of items
    """
    tasks = list(items)
    workers = min(resolve_threads(threads), max(len(tasks), 1))
    if workers <= 1:
        return [fn(task) for task in tasks]
    logger.debug(f"Mapping {len(tasks)} tasks over {workers} processes")
    chunksize = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunksize))
