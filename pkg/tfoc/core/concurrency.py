"""
Thread-pool helpers shared by the corpus sweeps and the experiment runner
"""

from concurrent.futures import ThreadPoolExecutor
import logging

from config import Config

logger = logging.getLogger(__name__)


def worker_count(workers=None):
    return max(1, int(workers if workers is not None else Config.WORKERS))


def parallel_map(fn, items, workers=None):
    """Ordered map over ``items``; results come back in input order."""
    items = list(items)
    n_workers = min(worker_count(workers), max(1, len(items)))
    if n_workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_workers) as executor:
        return list(executor.map(fn, items))


def chunk_slices(total, chunk_size):
    for start in range(0, total, chunk_size):
        yield slice(start, min(start + chunk_size, total))
