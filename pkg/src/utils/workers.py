"""Bounded thread pool used for the independent units of a computation.

numpy and scipy release the GIL inside their linear-algebra and special-function
kernels, so threads are enough for the channel scans and parameter sweeps.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

from .config import config
from .logging import setup_logger

logger = setup_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(max_workers: Optional[int] = None) -> int:
    """Cap the requested worker count by SHELLSPECTRA_THREADS."""
    cap = max(1, int(config.threads))
    if max_workers is None:
        return cap
    return max(1, min(int(max_workers), cap))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> list[R]:
    """Apply fn to every item and return results in input order.

    Exceptions raised by a worker propagate to the caller unchanged.
    """
    work = list(items)
    workers = min(resolve_workers(max_workers), max(1, len(work)))
    if workers == 1 or len(work) <= 1:
        return [fn(item) for item in work]

    logger.debug(f"Dispatching {len(work)} tasks to {workers} worker threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))
