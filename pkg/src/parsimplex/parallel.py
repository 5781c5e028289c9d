"""Worker pool with static task assignment and deterministic merge order."""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np


class WorkerPool:
    """Runs callables on ``workers`` threads.

    Tasks are dealt round-robin so worker ``k`` runs tasks ``k, k+W, ...``;
    results always come back in submission order. With one worker everything
    runs inline on the calling thread.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self._executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        self.assignments: list[list[int]] = []
        self._lock = threading.Lock()

    def run(self, tasks):
        """Run ``tasks`` (zero-argument callables); return their results in order."""
        n = len(tasks)
        results = [None] * n
        assignment = [[] for _ in range(self.workers)]
        for k in range(n):
            assignment[k % self.workers].append(k)
        with self._lock:
            self.assignments.append([len(a) for a in assignment])
        if self._executor is None or n <= 1:
            for k in range(n):
                results[k] = tasks[k]()
            return results

        def lane(ks):
            for k in ks:
                results[k] = tasks[k]()

        futures = [self._executor.submit(lane, ks) for ks in assignment if ks]
        for f in futures:
            f.result()
        return results

    def map_blocks(self, fn, size: int, serial: bool = False):
        """Apply ``fn(lo, hi)`` over contiguous blocks of ``range(size)``."""
        if serial or self.workers == 1 or size < 2 * self.workers:
            return [fn(0, size)]
        edges = np.linspace(0, size, self.workers + 1).astype(int)
        tasks = [(lambda lo=lo, hi=hi: fn(lo, hi)) for lo, hi in zip(edges[:-1], edges[1:])]
        return self.run(tasks)

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def random_partition(count: int, parts: int, seed: int = 0) -> list[np.ndarray]:
    """Split ``range(count)`` into ``parts`` shuffled blocks, each sorted."""
    perm = np.random.default_rng(seed).permutation(count)
    return [np.sort(b) for b in np.array_split(perm, parts)]
