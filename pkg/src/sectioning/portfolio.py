"""Run several seeded searches in separate processes.

Workers share one best-solution slot. At each restart a worker publishes its
best if it beats the slot, or else adopts the slot's solution when that one is
strictly better. Reads and writes go through one lock, so every exchange is
atomic. The overall result is the best final solution over all workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from multiprocessing import Manager


class BestExchange:
    def __init__(self, manager):
        self._lock = manager.Lock()
        self._ns = manager.Namespace()
        self._ns.value = math.inf
        self._ns.payload = None

    def offer(self, value: float, payload):
        """Publish ``payload`` if it is the best so far, else return a better one."""
        with self._lock:
            best = self._ns.value
            if value < best:
                self._ns.value = value
                self._ns.payload = payload
                return None
            if best < value:
                return best, self._ns.payload
            return None

    def best(self):
        with self._lock:
            return self._ns.value, self._ns.payload


def run_portfolio(fn, jobs: list[dict], workers: int, key):
    """Call ``fn(**job, exchange=...)`` for each job; return the minimum by ``key``.

    Ties go to the earliest job, so the choice does not depend on finishing order.
    """
    with Manager() as manager:
        exchange = BestExchange(manager)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, **job, exchange=exchange) for job in jobs]
            results = [f.result() for f in futures]
    return min(enumerate(results), key=lambda p: (key(p[1]), p[0]))[1]


def improve_portfolio(inst, start, obj, budget, seed, max_iters, patience, kick_size, workers,
                      target=None):
    from .improve import improve
    jobs = [dict(inst=inst, start=start, obj=obj, budget=budget, seed=seed + k,
                 max_iters=max_iters, patience=patience, kick_size=kick_size, target=target)
            for k in range(workers)]
    return run_portfolio(improve, jobs, workers, key=lambda r: r[1])
