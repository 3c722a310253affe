import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from raftmin import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_sweep(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None,
              label: str = "sweep") -> List[R]:
    """Evaluate independent tasks concurrently; results keep input order."""
    items = list(items)
    if not items:
        return []
    workers = max(1, min(max_workers or settings.THREADS, len(items)))
    logger.info(f"Running {label} over {len(items)} points with {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(fn, item) for item in items]
        results = []
        for item, future in zip(items, futures):
            try:
                results.append(future.result())
            except Exception as e:
                logger.error(f"{label} point {item!r} failed: {e}")
                raise
    return results
