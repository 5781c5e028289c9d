"""Random LP instances for tests and benchmarks."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lp import CompLp


def random_lp(m: int, n: int, density: float = 0.2, seed: int = 0, boxed: bool = True,
              name: str | None = None) -> CompLp:
    """Feasible LP with ``m`` rows and ``n`` structural columns.

    A point inside the column bounds fixes the row activities, and row bounds
    are placed around them, so the model is always feasible. With ``boxed``
    every column has finite bounds and the model is bounded too.
    """
    rng = np.random.default_rng(seed)
    a = sp.random(m, n, density=density, random_state=rng, format="csc",
                  data_rvs=lambda k: rng.uniform(-5, 5, k))
    # keep every column and row nonempty
    a = a.tolil()
    for j in range(n):
        if a[:, j].nnz == 0:
            a[rng.integers(m), j] = rng.uniform(1, 5)
    for i in range(m):
        if a[i, :].nnz == 0:
            a[i, rng.integers(n)] = rng.uniform(1, 5)
    a = a.tocsc()
    lower = rng.uniform(-10, 0, n).round(1)
    upper = lower + rng.uniform(1, 20, n).round(1)
    if not boxed:
        kind = rng.integers(0, 4, n)
        upper[kind == 1] = np.inf
        lower[kind == 2] = -np.inf
        lower[kind == 3], upper[kind == 3] = -np.inf, np.inf
    x0 = np.clip(rng.uniform(-5, 5, n), lower, upper)
    act = a @ x0
    row_lo = np.full(m, -np.inf)
    row_up = np.full(m, np.inf)
    kind = rng.integers(0, 4, m)
    slack = rng.uniform(0, 5, m).round(1)
    row_up[kind == 0] = act[kind == 0] + slack[kind == 0]
    row_lo[kind == 1] = act[kind == 1] - slack[kind == 1]
    row_lo[kind == 2] = row_up[kind == 2] = act[kind == 2]
    row_lo[kind == 3] = act[kind == 3] - slack[kind == 3]
    row_up[kind == 3] = act[kind == 3] + slack[kind == 3] + 1.0
    cost = rng.normal(0, 1, n).round(2)
    return CompLp.from_rows(a, row_lo, row_up, cost, lower, upper, name=name or f"rand_{m}x{n}_{seed}")


def random_suite(count: int = 50, seed: int = 0, max_rows: int = 40, max_cols: int = 80,
                 density: float = 0.2) -> list[CompLp]:
    """The random test suite: sizes drawn uniformly, one seed per instance."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        m = int(rng.integers(5, max_rows + 1))
        n = int(rng.integers(m, max_cols + 1))
        out.append(random_lp(m, n, density, seed=1000 * seed + k))
    return out
