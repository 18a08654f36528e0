"""Numba toggle and process-pool helpers.

Hot kernels (see :mod:`clamr.kernels`) are compiled with numba by default.
Setting ``CLAMR_NUMBA=0`` (or ``false`` / ``off`` / ``no``) makes the same
source run interpreted on numpy arrays instead. Numba's implementation of
``np.random.Generator`` draws the identical bitstream to numpy's, so the two
modes produce bitwise-identical results; they differ only in speed.

``CLAMR_THREADS`` caps the number of worker processes used for multi-chain
runs and replication studies. Unset, it defaults to the machine's CPU count.
"""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor

_FALSEY = {"0", "false", "off", "no"}


def _flag_enabled() -> bool:
    raw = os.environ.get("CLAMR_NUMBA", "1").strip().lower()
    return raw not in _FALSEY


NUMBA_ENABLED = _flag_enabled()

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def jit_kernel(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(func)
    return func


def worker_count(n_tasks: int) -> int:
    """Number of worker processes to use for ``n_tasks`` independent tasks."""
    env = os.environ.get("CLAMR_THREADS")
    if env:
        cap = max(1, int(env))
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Map ``fn`` over ``items``, preserving order.

    Runs serially when only one worker (or one item) is requested, otherwise
    fans out over forked processes. ``fn`` and each item must be picklable.
    Results are a pure function of the items, so the schedule cannot change
    the output.
    """
    items = list(items)
    if workers is None:
        workers = worker_count(len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(fn, items))
