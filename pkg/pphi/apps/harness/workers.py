"""Replica scheduling on a thread pool.

numpy and scipy.fft release the GIL inside their kernels, so threads give
real parallelism for the FFT-heavy per-replica work. Results are always
returned in replica order; each replica draws only from its own seeded
streams, so outputs do not depend on the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from django.conf import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")


def worker_count(workers: Optional[int] = None) -> int:
    return max(1, int(workers if workers is not None else settings.PPHI_WORKERS))


def map_replicas(
    task: Callable[[int], T], replicas: Iterable[int], workers: Optional[int] = None
) -> List[T]:
    """Run `task(replica)` for every replica index and collect results in order."""
    indices = list(replicas)
    count = worker_count(workers)
    if count == 1 or len(indices) <= 1:
        return [task(index) for index in indices]

    logger.debug("Scheduling %d replicas on %d workers", len(indices), count)
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(task, indices))
