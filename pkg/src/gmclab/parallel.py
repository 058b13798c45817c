"""Replica-parallel execution with worker-count-invariant results.

Replicas are processed in fixed contiguous chunks whose boundaries depend
only on the replica count, never on the worker count.  Workers execute
whole chunks; results are reduced strictly in chunk order, so any worker
count yields bit-identical statistics.
"""

from concurrent.futures import ThreadPoolExecutor

CHUNK = 256


def chunk_ranges(n_replicas: int, chunk: int = CHUNK):
    return [(lo, min(lo + chunk, n_replicas)) for lo in range(0, n_replicas, chunk)]


def map_chunks(fn, n_replicas: int, workers: int = 1, chunk: int = CHUNK):
    """Apply `fn(lo, hi)` to every replica chunk, returning results in order.

    `fn` must be pure given the chunk bounds (replica seeds are derived from
    the replica index, not from any shared RNG state).
    """
    ranges = chunk_ranges(n_replicas, chunk)
    if workers <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))
