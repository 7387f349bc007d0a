"""Ordered process-pool map. Results never depend on the worker count."""

from __future__ import annotations

import os
import pickle
from concurrent.futures import ProcessPoolExecutor


def default_jobs() -> int:
    return os.cpu_count() or 1


def pmap(fn, items, jobs=None):
    items = list(items)
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    try:
        pickle.dumps((fn, items[0]))
    except Exception:
        # lambdas / user closures cannot cross process boundaries
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
