"""LP computational form, basis bookkeeping and shared scalar formulas.

An LP is held as ``min c^T x  s.t.  A x = 0,  l <= x <= u`` where the last
``m`` columns of ``A`` are the logical identity block.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NonPositiveWeight

INF = math.inf


class Status(enum.IntEnum):
    BASIC = 0
    AT_LOWER = 1
    AT_UPPER = 2
    FIXED = 3
    FREE = 4


@dataclass(frozen=True)
class Tolerances:
    primal_tol: float = 1e-7
    dual_tol: float = 1e-7
    pivot_tol: float = 1e-9
    harris_relax: float = 1e-7
    zero_drop: float = 1e-14

    def __post_init__(self):
        for name in ("primal_tol", "dual_tol", "pivot_tol", "harris_relax", "zero_drop"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class CompLp:
    """LP in computational form.

    ``matrix`` is an ``m x n`` CSC matrix whose trailing ``m`` columns are the
    identity. ``objective_offset`` and ``maximize`` let callers report the
    objective of the original model.
    """

    matrix: sp.csc_matrix
    cost: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    name: str = ""
    col_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    objective_offset: float = 0.0
    maximize: bool = False

    def __post_init__(self):
        self.matrix = sp.csc_matrix(self.matrix, dtype=float)
        self.matrix.sort_indices()
        self.cost = np.asarray(self.cost, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        m, n = self.matrix.shape
        if not (len(self.cost) == len(self.lower) == len(self.upper) == n):
            raise ValueError("cost/bound lengths must equal the column count")
        if n <= m:
            raise ValueError("computational form needs n > m")
        self._csr = None

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def num_structural(self) -> int:
        return self.num_cols - self.num_rows

    @property
    def csr(self) -> sp.csr_matrix:
        if self._csr is None:
            self._csr = self.matrix.tocsr()
            self._csr.sort_indices()
        return self._csr

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        a = self.matrix
        lo, hi = a.indptr[j], a.indptr[j + 1]
        return a.indices[lo:hi], a.data[lo:hi]

    def dense_column(self, j: int) -> np.ndarray:
        out = np.zeros(self.num_rows)
        idx, val = self.column(j)
        out[idx] = val
        return out

    def check(self) -> None:
        """Raise ``ValueError`` when the logical block or bounds are malformed."""
        m, n = self.matrix.shape
        for i in range(m):
            idx, val = self.column(n - m + i)
            if len(idx) != 1 or idx[0] != i or val[0] != 1.0:
                raise ValueError(f"logical column {n - m + i} is not e_{i}")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @classmethod
    def from_rows(cls, a_rows, row_lower, row_upper, cost, lower, upper, **kw) -> "CompLp":
        """Build the computational form of ``row_lower <= A x <= row_upper``.

        Logical ``s_i = -(A x)_i`` so the row bounds become ``[-row_upper, -row_lower]``.
        """
        a_rows = sp.csc_matrix(a_rows, dtype=float)
        m = a_rows.shape[0]
        matrix = sp.hstack([a_rows, sp.identity(m, format="csc")], format="csc")
        cost = np.concatenate([np.asarray(cost, float), np.zeros(m)])
        lo = np.concatenate([np.asarray(lower, float), -np.asarray(row_upper, float)])
        up = np.concatenate([np.asarray(upper, float), -np.asarray(row_lower, float)])
        return cls(matrix, cost, lo, up, **kw)


class Basis:
    """Basic index sequence plus a status for every column."""

    def __init__(self, basic, status):
        self.basic = np.asarray(basic, dtype=np.int64).copy()
        self.status = np.asarray(status, dtype=np.int8).copy()

    @classmethod
    def logical(cls, lp: CompLp) -> "Basis":
        m, n = lp.num_rows, lp.num_cols
        status = np.array([default_status(lp.lower[j], lp.upper[j]) for j in range(n)], dtype=np.int8)
        basic = np.arange(n - m, n)
        status[basic] = Status.BASIC
        return cls(basic, status)

    def copy(self) -> "Basis":
        return Basis(self.basic, self.status)

    def nonbasic(self) -> np.ndarray:
        return np.flatnonzero(self.status != Status.BASIC)

    def validate(self, lp: CompLp) -> None:
        n = lp.num_cols
        if len(self.basic) != lp.num_rows or len(set(self.basic.tolist())) != lp.num_rows:
            raise ValueError("basis must hold m distinct columns")
        is_basic = np.zeros(n, dtype=bool)
        is_basic[self.basic] = True
        if not np.array_equal(is_basic, self.status == Status.BASIC):
            raise ValueError("status map disagrees with basic set")
        for j in np.flatnonzero(~is_basic):
            st, lo, up = self.status[j], lp.lower[j], lp.upper[j]
            if st == Status.FIXED and lo != up:
                raise ValueError(f"column {j} FIXED with l != u")
            if st == Status.FREE and (np.isfinite(lo) or np.isfinite(up)):
                raise ValueError(f"column {j} FREE with a finite bound")
            if st == Status.AT_LOWER and not np.isfinite(lo):
                raise ValueError(f"column {j} AT_LOWER with infinite lower bound")
            if st == Status.AT_UPPER and not np.isfinite(up):
                raise ValueError(f"column {j} AT_UPPER with infinite upper bound")


def default_status(lo: float, up: float) -> Status:
    if lo == up:
        return Status.FIXED
    if np.isfinite(lo):
        return Status.AT_LOWER
    if np.isfinite(up):
        return Status.AT_UPPER
    return Status.FREE


def nonbasic_value(status: int, lo: float, up: float) -> float:
    if status == Status.AT_LOWER or status == Status.FIXED:
        return lo
    if status == Status.AT_UPPER:
        return up
    return 0.0


def nonbasic_values(status: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Vector of nonbasic values; basic entries are zero."""
    x = np.zeros(len(status))
    at_lo = (status == Status.AT_LOWER) | (status == Status.FIXED)
    at_up = status == Status.AT_UPPER
    x[at_lo] = lower[at_lo]
    x[at_up] = upper[at_up]
    return x


def primal_infeasibility(x: float, lo: float, up: float) -> float:
    if x < lo:
        return lo - x
    if x > up:
        return x - up
    return 0.0


def primal_infeasibilities(x, lo, up) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.maximum(np.maximum(lo - x, x - up), 0.0)


def is_dual_feasible(status: int, c_hat: float, dual_tol: float) -> bool:
    if status == Status.AT_LOWER:
        return c_hat >= -dual_tol
    if status == Status.AT_UPPER:
        return c_hat <= dual_tol
    if status == Status.FIXED:
        return True
    if status == Status.FREE:
        return abs(c_hat) <= dual_tol
    raise ValueError(f"not a nonbasic status: {status}")


def dual_infeasibilities(status: np.ndarray, c_hat: np.ndarray) -> np.ndarray:
    """Per-column violation of the dual feasibility conditions (0 when satisfied)."""
    out = np.zeros(len(c_hat))
    lo = status == Status.AT_LOWER
    up = status == Status.AT_UPPER
    fr = status == Status.FREE
    out[lo] = np.maximum(-c_hat[lo], 0.0)
    out[up] = np.maximum(c_hat[up], 0.0)
    out[fr] = np.abs(c_hat[fr])
    return out


def attractiveness(delta_x: float, w: float) -> float:
    """Weighted infeasibility ``delta_x / w`` where ``w`` is a row norm."""
    if not w > 0:
        raise NonPositiveWeight(f"weight {w}")
    if delta_x == 0:
        return 0.0
    return delta_x / w


def compute_objective(lp: CompLp, basis: Basis, x_basic) -> float:
    x = nonbasic_values(basis.status, lp.lower, lp.upper)
    x[basis.basic] = x_basic
    return float(np.dot(lp.cost, x))


def full_primal(lp: CompLp, basis: Basis, x_basic) -> np.ndarray:
    x = nonbasic_values(basis.status, lp.lower, lp.upper)
    x[basis.basic] = x_basic
    return x


@dataclass
class SolverState:
    """Iterate of a dual simplex engine."""

    x_basic: np.ndarray
    dual_reduced: np.ndarray
    weight: np.ndarray
    objective: float
    tolerances: Tolerances = field(default_factory=Tolerances)
