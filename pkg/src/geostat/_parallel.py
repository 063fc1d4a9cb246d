import os
from concurrent.futures import ThreadPoolExecutor


def max_threads() -> int:
    """Worker cap from ``GEOSTAT_THREADS`` (default: up to 4 cores)."""
    raw = os.environ.get("GEOSTAT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def map_chunks(fn, n_items: int, chunk: int = 64) -> list:
    """Apply ``fn(start, stop)`` over consecutive slices, results in slice order.

    Each slice is computed independently, so output does not depend on the
    number of workers.
    """
    bounds = [(i, min(i + chunk, n_items)) for i in range(0, n_items, chunk)]
    workers = min(max_threads(), len(bounds))
    if workers <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))
