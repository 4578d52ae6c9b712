"""Seeded random streams and deterministic batch execution.

Every random draw in the package comes from ``stream(master, *path)``: a
Philox counter-based generator keyed by a SeedSequence whose spawn key is the
path of non-negative integers (for example ``(role, graph_index)``). Batches
are evaluated per index and re-assembled in index order, so results never
depend on how many workers ran them.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

MASK64 = (1 << 64) - 1

# Spawn-key roles, kept distinct so calibration and evaluation never share draws.
ROLE_NULL_CALIBRATE = 1
ROLE_NULL_EVALUATE = 2
ROLE_PLANTED = 3
ROLE_LIMIT_NULL = 4
ROLE_LIMIT_PLANTED = 5
ROLE_BOOTSTRAP = 6
ROLE_GENERIC = 7


def stream(master, *path) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master) & MASK64,
                                spawn_key=tuple(int(p) & MASK64 for p in path))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    """Accept a Generator, an int master seed, or None (fresh entropy)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.default_rng()
    return stream(int(seed))


def worker_count(requested=None):
    """Explicit request, else the BLOCKLAB_WORKERS environment variable, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("BLOCKLAB_WORKERS")
    return max(1, int(env)) if env else 1


def run_indexed(fn, items, workers=None):
    """Evaluate fn over items and return results in item order.

    fn must be picklable (a top-level function or functools.partial of one)
    when more than one worker is used.
    """
    items = list(items)
    workers = worker_count(workers)
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
