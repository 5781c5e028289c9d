"""Serial dual revised simplex engine.

Dual steepest-edge CHUZR, BTRAN + SPMV pivotal row, bound-flipping ratio test
with Harris two passes, the three FTRANs and all update formulas. Components
are written over explicit state so the parallel engines can reuse them.
"""

from __future__ import annotations

import enum
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import (AllTinyPivots, DualUnbounded, FtFailure, NonPositiveWeight, SingularBasis,
                     StaleFactors, TinyPivot)
from .factor import BasisFactor, SparseVector
from .lp import (Basis, CompLp, Status, Tolerances, default_status, dual_infeasibilities,
                 nonbasic_values, primal_infeasibilities)
from .mps import reported_objective
from .parallel import random_partition

COMPONENTS = (
    "INVERT", "UPDATE-FACTOR", "CHUZR", "BTRAN", "SPMV", "CHUZC1", "CHUZC2", "FTRAN",
    "FTRAN-BFRT", "FTRAN-DSE", "UPDATE-DUAL", "UPDATE-PRIMAL", "UPDATE-WEIGHT", "OTHER",
)
W_MIN = 1e-4
ZERO_TOL = 1e-10
ROWWISE_DENSITY = 0.10
ARTIFICIAL_BOUND = 1e7


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    DUAL_UNBOUNDED = "dual_unbounded"  # primal infeasible
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class Options:
    tolerances: Tolerances = field(default_factory=Tolerances)
    max_iter: int = 1_000_000
    time_limit: float = math.inf
    update: str = "ft"  # ft | pf | apf
    refactor_limit: int = 100
    heap_size: int = 32
    degenerate_limit: int = 1000
    seed: int = 0
    workers: int = 1
    s: int = 8
    cutoff: float = 0.95
    density_revert: float = 0.10
    monitor: object = None  # callable(engine) at every iteration boundary

    def __post_init__(self):
        if self.update not in ("ft", "pf", "apf"):
            raise ValueError("update must be one of ft, pf, apf")
        if self.workers < 1 or self.s < 1:
            raise ValueError("workers and s must be >= 1")
        if not 0 < self.cutoff <= 1.001:
            raise ValueError("cutoff must lie in (0, 1.001]")
        if not 0 < self.density_revert <= 1:
            raise ValueError("density_revert must lie in (0, 1]")


@dataclass
class Solution:
    status: SolveStatus
    objective: float
    x: np.ndarray
    iterations: int
    timings: dict
    pivot_log: list
    basis: Basis
    dual_reduced: np.ndarray
    result_counts: dict
    wall_time: float = 0.0
    major_iterations: int = 0
    warnings: list = field(default_factory=list)
    reported_objective: float = math.nan

    @property
    def structural_x(self) -> np.ndarray:
        m = len(self.basis.basic)
        return self.x[: len(self.x) - m]


# ---------------------------------------------------------------- CHUZR

def row_attractiveness(delta: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """``delta_i / sqrt(w_i)`` with ``w_i`` the squared row norm; zero when feasible."""
    if np.any(~(weight > 0)):
        raise NonPositiveWeight("nonpositive DSE weight")
    return delta / np.sqrt(weight)


def chuzr_exhaustive(delta: np.ndarray, weight: np.ndarray):
    """Full-scan DSE choice; lowest index wins ties. ``None`` means optimal."""
    alpha = row_attractiveness(delta, weight)
    if len(alpha) == 0 or alpha.max() <= 0:
        return None
    return int(np.argmax(alpha))


class CandidateHeap:
    """Short list of the most attractive rows plus a bound on everything else.

    Rows outside the list have attractiveness at most ``cutoff`` unless they
    were touched by an update, in which case they are added to the list.
    """

    def __init__(self, size: int = 32):
        self.size = size
        self.members: set | None = None
        self.cutoff = 0.0
        self.rescans = 0

    def invalidate(self):
        self.members = None

    def touch(self, rows):
        if self.members is not None:
            self.members.update(int(r) for r in rows)
            if len(self.members) > 4 * self.size:
                self.members = None

    def rebuild(self, alpha: np.ndarray):
        self.rescans += 1
        pos = np.flatnonzero(alpha > 0)
        if len(pos) <= self.size:
            self.members, self.cutoff = set(pos.tolist()), 0.0
            return
        order = np.lexsort((pos, -alpha[pos]))
        self.members = set(pos[order[: self.size]].tolist())
        self.cutoff = float(alpha[pos[order[self.size]]])

    def entries(self, alpha_of) -> list[tuple[int, float]]:
        rows = np.array(sorted(self.members or ()), dtype=np.int64)
        a = alpha_of(rows) if len(rows) else np.zeros(0)
        return [(int(r), float(v)) for r, v in zip(rows, a) if v > 0]

    def choose(self, alpha_of):
        """``alpha_of(rows)`` gives attractiveness of ``rows`` (all rows if ``None``)."""
        if self.members:
            rows = np.array(sorted(self.members), dtype=np.int64)
            a = alpha_of(rows)
            k = int(np.argmax(a))
            if a[k] > self.cutoff:
                return int(rows[k])
        full = alpha_of(None)
        self.rebuild(full)
        if len(full) == 0 or full.max() <= 0:
            return None
        return int(np.argmax(full))


# ---------------------------------------------------------------- pricing

class PartitionKernel:
    """Pivotal-row entries ``e^T a_j`` for a fixed set of structural columns.

    Both routes accumulate each column's products in a fixed order that does
    not depend on how columns are partitioned, so results are bitwise equal
    across partitionings.
    """

    def __init__(self, csc, csr, cols: np.ndarray, num_structural: int):
        self.cols = np.asarray(cols, dtype=np.int64)
        self.csr = csr
        starts, ends = csc.indptr[self.cols], csc.indptr[self.cols + 1]
        lens = ends - starts
        idx = _ranges(starts, lens)
        self.g_rows = csc.indices[idx]
        self.g_vals = csc.data[idx]
        self.g_pos = np.repeat(np.arange(len(self.cols)), lens)
        self.pos_of = np.full(num_structural, -1, dtype=np.int64)
        self.pos_of[self.cols] = np.arange(len(self.cols))

    def colwise(self, e_dense: np.ndarray) -> np.ndarray:
        prod = e_dense[self.g_rows] * self.g_vals
        return np.bincount(self.g_pos, prod, minlength=len(self.cols))

    def rowwise(self, rows: np.ndarray, e_dense: np.ndarray) -> np.ndarray:
        ip = self.csr.indptr
        lens = ip[rows + 1] - ip[rows]
        idx = _ranges(ip[rows], lens)
        pos = self.pos_of[self.csr.indices[idx]]
        prod = np.repeat(e_dense[rows], lens) * self.csr.data[idx]
        keep = pos >= 0
        return np.bincount(pos[keep], prod[keep], minlength=len(self.cols))

    def price(self, e_hat: SparseVector) -> np.ndarray:
        if e_hat.density < ROWWISE_DENSITY:
            return self.rowwise(np.sort(e_hat.index), e_hat.array)
        return self.colwise(e_hat.array)


def _ranges(starts, lens) -> np.ndarray:
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offs = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
    return offs + np.arange(total)


class RowPricer:
    """Structural columns split into ``parts`` random blocks (fixed seed)."""

    def __init__(self, lp: CompLp, parts: int = 1, seed: int = 0):
        ns = lp.num_structural
        csc = lp.matrix[:, :ns].tocsc()
        csc.sort_indices()
        csr = csc.tocsr()
        csr.sort_indices()
        self.num_structural = ns
        self.parts = [PartitionKernel(csc, csr, cols, ns) for cols in random_partition(ns, parts, seed)]


# ---------------------------------------------------------------- CHUZC

@dataclass
class Candidates:
    index: np.ndarray  # column j
    a: np.ndarray      # pivotal-row entry a_pj
    absd: np.ndarray   # |a_pj|
    dc: np.ndarray     # reduced cost signed so that feasibility means dc >= 0

    @classmethod
    def empty(cls):
        z = np.zeros(0)
        return cls(np.zeros(0, dtype=np.int64), z, z, z)

    @classmethod
    def merge(cls, parts):
        parts = [p for p in parts if len(p.index)]
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("index", "a", "absd", "dc")))

    def __len__(self):
        return len(self.index)


def chuzc1(cols, a_vals, sigma: int, status, c_hat, zero_tol: float = ZERO_TOL) -> Candidates:
    """Columns whose reduced cost moves towards its bound as the dual step grows."""
    cols = np.asarray(cols, dtype=np.int64)
    st = status[cols]
    d = sigma * a_vals
    keep = (((st == Status.AT_LOWER) & (d > zero_tol))
            | ((st == Status.AT_UPPER) & (d < -zero_tol))
            | ((st == Status.FREE) & (np.abs(d) > zero_tol)))
    j = cols[keep]
    dk = d[keep]
    return Candidates(j, a_vals[keep], np.abs(dk), np.sign(dk) * c_hat[j])


@dataclass
class RatioTestOutcome:
    q: int | None
    theta_dual: float
    theta_primal: float
    flips: np.ndarray
    flip_deltas: np.ndarray
    pivot: float
    step: float = 0.0
    shift: bool = False


def chuzc2_bfrt_harris(cand: Candidates, delta: float, sigma: int, ranges: np.ndarray, status,
                       tol: Tolerances) -> RatioTestOutcome:
    """Bound-flipping ratio test with Harris two passes on each group.

    ``delta`` is the primal infeasibility of the leaving row, ``sigma`` is +1
    when it is above its upper bound and -1 when below its lower bound.
    """
    if len(cand) == 0:
        raise DualUnbounded("no candidate blocks the dual step")
    order = np.argsort(cand.index, kind="stable")
    j, a, absd, dc = cand.index[order], cand.a[order], cand.absd[order], cand.dc[order]
    ratio = dc / absd
    relaxed = (dc + tol.harris_relax) / absd
    rng = ranges[j]
    remaining = np.ones(len(j), dtype=bool)
    slope = float(delta)
    flipped = []
    while True:
        if not remaining.any():
            raise DualUnbounded("every candidate flips; dual step unbounded")
        theta = relaxed[remaining].min()
        group = np.flatnonzero(remaining & (ratio <= theta))
        absorb = float(np.sum(absd[group] * rng[group]))
        if math.isfinite(absorb) and slope - absorb > 0:
            flipped.extend(group.tolist())
            slope -= absorb
            remaining[group] = False
            continue
        best = int(group[np.argmax(absd[group])])
        break
    if absd[best] < tol.pivot_tol:
        raise AllTinyPivots(f"best pivot {absd[best]:.3e}")
    t = float(ratio[best])
    shift = t < 0
    if shift:
        t = 0.0
    flips = j[flipped]
    deltas = np.where(status[flips] == Status.AT_LOWER, rng[flipped], -rng[flipped])
    piv = float(a[best])
    return RatioTestOutcome(int(j[best]), sigma * t, sigma * slope / piv, flips, deltas, piv, t, shift)


# ---------------------------------------------------------------- updates

def dse_update(w: np.ndarray, p: int, a_hat_q: SparseVector, tau: SparseVector, alpha: float,
               w_p: float) -> int:
    """Dual steepest-edge update; ``w_p`` is the exact pre-update ``||e_p^T B^-1||^2``.

    Returns the number of weights repaired by the floor.
    """
    idx = a_hat_q.index[a_hat_q.index != p]
    r = a_hat_q.array[idx] / alpha
    new = w[idx] - 2.0 * r * tau.array[idx] + r * r * w_p
    if not np.all(np.isfinite(new)):
        raise NonPositiveWeight("non-finite DSE weight")
    repaired = int(np.count_nonzero(new < W_MIN))
    w[idx] = np.maximum(new, W_MIN)
    w[p] = max(w_p / (alpha * alpha), W_MIN)
    return repaired


# ---------------------------------------------------------------- engine

class DualEngine:
    """State and shared machinery of the dual simplex engines."""

    engine_name = "serial"

    def __init__(self, lp: CompLp, options: Options | None = None, parts: int = 1):
        self.lp = lp
        self.opts = options or Options()
        self.tol = self.opts.tolerances
        self.m, self.n = lp.num_rows, lp.num_cols
        self.ns = lp.num_structural
        self.cost = lp.cost.copy()
        self.lower = lp.lower.copy()
        self.upper = lp.upper.copy()
        self.artificial = np.zeros(self.n, dtype=bool)
        self.basis = Basis.logical(lp)
        self.factor = BasisFactor(self.m, refactor_limit=self.opts.refactor_limit,
                                  pivot_tol=self.tol.pivot_tol, zero_drop=self.tol.zero_drop)
        self.pricer = RowPricer(lp, parts, self.opts.seed)
        self.heap = CandidateHeap(self.opts.heap_size)
        self.rng = np.random.default_rng(self.opts.seed)
        self.timers = dict.fromkeys(COMPONENTS, 0.0)
        self.pivot_log: list[str] = []
        self.iterations = 0
        self.major_iterations = 0
        self.objective = 0.0
        self.x_basic = np.zeros(self.m)
        self.c_hat = np.zeros(self.n)
        self.weight = np.ones(self.m)
        self.cost_modified = False
        self.perturbed = False
        self.degenerate_run = 0
        self.cleanup_rounds = 0
        self.weight_repairs = 0
        self.warnings: list[str] = []
        self._t0 = time.perf_counter()

    # ------------------------------------------------------------ helpers

    @contextmanager
    def timed(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timers[name] += time.perf_counter() - t0

    def column(self, j: int) -> SparseVector:
        idx, val = self.lp.column(j)
        v = SparseVector(self.m)
        v.array[idx] = val
        v.index = np.array(idx, dtype=np.int64)
        return v

    def ranges(self) -> np.ndarray:
        return self.upper - self.lower

    def basic_bounds(self):
        b = self.basis.basic
        return self.lower[b], self.upper[b]

    def infeasibilities(self, rows=None) -> np.ndarray:
        b = self.basis.basic if rows is None else self.basis.basic[rows]
        x = self.x_basic if rows is None else self.x_basic[rows]
        d = primal_infeasibilities(x, self.lower[b], self.upper[b])
        d[d <= self.tol.primal_tol] = 0.0
        return d

    def alpha_of(self, rows=None) -> np.ndarray:
        w = self.weight if rows is None else self.weight[rows]
        return row_attractiveness(self.infeasibilities(rows), w)

    def leaving_direction(self, p: int, x_p: float | None = None):
        j = self.basis.basic[p]
        x = self.x_basic[p] if x_p is None else x_p
        if x > self.upper[j]:
            return 1, x - self.upper[j]
        return -1, self.lower[j] - x

    def nonbasic_value(self, j: int) -> float:
        st = self.basis.status[j]
        if st == Status.AT_LOWER or st == Status.FIXED:
            return self.lower[j]
        if st == Status.AT_UPPER:
            return self.upper[j]
        return 0.0

    # ------------------------------------------------------------ setup / INVERT

    def setup(self):
        with self.timed("INVERT"):
            self.invert()
            self.compute_duals()
        with self.timed("OTHER"):
            self.initial_statuses()
        with self.timed("INVERT"):
            self.compute_primal()
        self.objective = self.current_objective()

    def initial_statuses(self):
        st, lo, up, c = self.basis.status, self.lower, self.upper, self.c_hat
        dt = self.tol.dual_tol
        big = ARTIFICIAL_BOUND
        for j in self.basis.nonbasic():
            l, u = lo[j], up[j]
            fl, fu = math.isfinite(l), math.isfinite(u)
            if l == u:
                st[j] = Status.FIXED
            elif fl and fu:
                st[j] = Status.AT_LOWER if c[j] >= 0 else Status.AT_UPPER
            elif fl:
                if c[j] >= -dt:
                    st[j] = Status.AT_LOWER
                else:
                    up[j] = max(l, 0.0) + big
                    self.artificial[j] = True
                    st[j] = Status.AT_UPPER
            elif fu:
                if c[j] <= dt:
                    st[j] = Status.AT_UPPER
                else:
                    lo[j] = min(u, 0.0) - big
                    self.artificial[j] = True
                    st[j] = Status.AT_LOWER
            elif abs(c[j]) <= dt:
                st[j] = Status.FREE
            else:
                lo[j], up[j] = -big, big
                self.artificial[j] = True
                st[j] = Status.AT_LOWER if c[j] > 0 else Status.AT_UPPER

    def invert(self):
        basis = self.basis
        for _ in range(3):
            try:
                self.factor.invert([self.lp.column(j) for j in basis.basic])
                break
            except SingularBasis as e:
                for pos, row in zip(e.positions, e.rows):
                    out = basis.basic[pos]
                    logical = self.ns + row
                    basis.status[out] = default_status(self.lower[out], self.upper[out])
                    basis.basic[pos] = logical
                    basis.status[logical] = Status.BASIC
                self.warnings.append(f"singular basis repaired ({len(e.positions)} column(s))")
        self.heap.invalidate()

    def compute_duals(self):
        cb = self.cost[self.basis.basic]
        y = self.factor.btran(SparseVector.from_dense(cb), record=False).array
        self.c_hat = self.cost - self.lp.matrix.T @ y
        self.c_hat[self.basis.basic] = 0.0

    def compute_primal(self):
        xn = nonbasic_values(self.basis.status, self.lower, self.upper)
        rhs = -(self.lp.matrix @ xn)
        self.x_basic = self.factor.ftran(SparseVector.from_dense(rhs), record=False).array.copy()
        self.heap.invalidate()

    def compute_weights(self):
        """Exact DSE weights by ``m`` BTRANs (maintenance path)."""
        m = self.m
        w = np.empty(m)
        for i in range(m):
            e = self.factor.btran(SparseVector.unit(m, i), record=False)
            w[i] = float(np.dot(e.array, e.array))
        self.weight = np.maximum(w, W_MIN)
        self.heap.invalidate()

    def current_objective(self, cost=None) -> float:
        c = self.cost if cost is None else cost
        x = nonbasic_values(self.basis.status, self.lower, self.upper)
        x[self.basis.basic] = self.x_basic
        return float(np.dot(c, x))

    def correct_dual_infeasibilities(self) -> bool:
        """Flip boxed dual-infeasible nonbasics and shift costs of the rest.

        Returns True when bounds were flipped (primal values recomputed).
        """
        st = self.basis.status
        viol = dual_infeasibilities(st, self.c_hat)
        bad = np.flatnonzero(viol > self.tol.dual_tol)
        if len(bad) == 0:
            return False
        rng = self.ranges()
        boxed = bad[np.isfinite(rng[bad]) & (st[bad] != Status.FREE)]
        other = np.setdiff1d(bad, boxed)
        for j in boxed:
            st[j] = Status.AT_UPPER if st[j] == Status.AT_LOWER else Status.AT_LOWER
        if len(other):
            self.cost[other] -= self.c_hat[other]
            self.c_hat[other] = 0.0
            self.cost_modified = True
        if len(boxed):
            self.compute_primal()
            return True
        return False

    def reinvert(self):
        with self.timed("INVERT"):
            self.invert()
            self.compute_primal()
            self.compute_duals()
            self.correct_dual_infeasibilities()
        self.objective = self.current_objective()

    # ------------------------------------------------------------ components

    def chuzr(self):
        return self.heap.choose(self.alpha_of)

    def btran_row(self, p: int) -> SparseVector:
        return self.factor.btran(SparseVector.unit(self.m, p))

    def price_partition(self, k: int, e_hat: SparseVector, sigma: int):
        """SPMV + CHUZC1 for structural partition ``k``."""
        part = self.pricer.parts[k]
        vals = part.price(e_hat)
        return vals, chuzc1(part.cols, vals, sigma, self.basis.status, self.c_hat)

    def price_logicals(self, e_hat: SparseVector, sigma: int) -> Candidates:
        cols = np.arange(self.ns, self.n)
        return chuzc1(cols, e_hat.array, sigma, self.basis.status, self.c_hat)

    def assemble_row(self, e_hat: SparseVector, part_values) -> np.ndarray:
        a_row = np.zeros(self.n)
        for part, vals in zip(self.pricer.parts, part_values):
            a_row[part.cols] = vals
        a_row[self.ns:] = e_hat.array
        return a_row

    def ratio_test(self, cand: Candidates, delta: float, sigma: int) -> RatioTestOutcome:
        return chuzc2_bfrt_harris(cand, delta, sigma, self.ranges(), self.basis.status, self.tol)

    def bfrt_column(self, outcome: RatioTestOutcome) -> SparseVector:
        """``a_F = sum_j delta_j a_j`` over the flipped columns."""
        v = np.zeros(self.m)
        for j, d in zip(outcome.flips, outcome.flip_deltas):
            idx, val = self.lp.column(int(j))
            v[idx] += d * val
        return SparseVector.from_dense(v)

    def update_duals(self, p: int, outcome: RatioTestOutcome, a_row: np.ndarray):
        q = outcome.q
        if outcome.shift:
            self.cost[q] -= self.c_hat[q]
            self.c_hat[q] = 0.0
            self.cost_modified = True
        if outcome.theta_dual != 0.0:
            self.c_hat -= outcome.theta_dual * a_row
        self.c_hat[self.basis.basic] = 0.0
        self.c_hat[self.basis.basic[p]] = -outcome.theta_dual
        self.c_hat[q] = 0.0

    def objective_change(self, outcome: RatioTestOutcome) -> float:
        df = self.c_hat[outcome.q] * outcome.theta_primal
        if len(outcome.flips):
            df += float(np.dot(self.c_hat[outcome.flips], outcome.flip_deltas))
        return df

    def update_primal(self, p: int, outcome: RatioTestOutcome, a_hat_q: SparseVector,
                      a_hat_f: SparseVector | None):
        x = self.x_basic
        idx = a_hat_q.index
        x[idx] -= outcome.theta_primal * a_hat_q.array[idx]
        touched = [idx, [p]]
        if a_hat_f is not None:
            x[a_hat_f.index] -= a_hat_f.array[a_hat_f.index]
            touched.append(a_hat_f.index)
        x[p] = self.nonbasic_value(outcome.q) + outcome.theta_primal
        st = self.basis.status
        for j in outcome.flips:
            st[j] = Status.AT_UPPER if st[j] == Status.AT_LOWER else Status.AT_LOWER
        self.heap.touch(np.concatenate([np.asarray(t, dtype=np.int64) for t in touched]))

    def update_weights(self, p: int, a_hat_q: SparseVector, tau: SparseVector, alpha: float, w_p: float):
        try:
            self.weight_repairs += dse_update(self.weight, p, a_hat_q, tau, alpha, w_p)
        except NonPositiveWeight:
            self.warnings.append("DSE weights recomputed")
            self.compute_weights()

    def change_basis(self, p: int, q: int, sigma: int):
        basis = self.basis
        out = basis.basic[p]
        if self.lower[out] == self.upper[out]:
            basis.status[out] = Status.FIXED
        else:
            basis.status[out] = Status.AT_UPPER if sigma > 0 else Status.AT_LOWER
        basis.basic[p] = q
        basis.status[q] = Status.BASIC
        return out

    def update_factor(self, p: int, spike: SparseVector, a_hat_q: SparseVector, alpha: float,
                      e_hat: SparseVector, q: int, out: int):
        kind = self.opts.update
        try:
            if kind == "ft":
                self.factor.append_ft_update(spike, self.factor.partial_btran_unit(p), p, alpha)
            elif kind == "pf":
                self.factor.append_pf_update(p, a_hat_q)
            else:
                self.factor.append_apf_update(e_hat, self.column(q), self.column(out))
        except (FtFailure, TinyPivot):
            return False
        return self.factor.update_count < self.factor.refactor_limit

    def log_pivot(self, p: int, outcome: RatioTestOutcome):
        self.pivot_log.append("%d %d %d %.17g %.17g %d" % (
            self.iterations, p, outcome.q, outcome.theta_primal, outcome.theta_dual, len(outcome.flips)))

    def note_degeneracy(self, outcome: RatioTestOutcome):
        self.degenerate_run = self.degenerate_run + 1 if outcome.step == 0.0 else 0
        if self.degenerate_run >= self.opts.degenerate_limit and not self.perturbed:
            self.perturb()

    def perturb(self):
        st = self.basis.status
        direction = np.where(st == Status.AT_LOWER, 1.0, np.where(st == Status.AT_UPPER, -1.0, 0.0))
        xi = self.rng.random(self.n) * 1e-9 * (1.0 + np.abs(self.lp.cost)) * direction
        self.cost += xi
        self.c_hat += xi
        self.perturbed = self.cost_modified = True

    def alpha_consistent(self, col_alpha: float, row_alpha: float) -> bool:
        return abs(col_alpha - row_alpha) <= 1e-7 * max(1.0, abs(col_alpha))

    # ------------------------------------------------------------ iteration

    def iterate(self):
        """One serial iteration. Returns a status on termination, else ``None``."""
        with self.timed("CHUZR"):
            p = self.chuzr()
        if p is None:
            return SolveStatus.OPTIMAL
        with self.timed("BTRAN"):
            e_hat = self.btran_row(p)
        sigma, delta = self.leaving_direction(p)
        part_values, part_cands = [], []
        for k in range(len(self.pricer.parts)):
            t0 = time.perf_counter()
            part = self.pricer.parts[k]
            vals = part.price(e_hat)
            t1 = time.perf_counter()
            part_cands.append(chuzc1(part.cols, vals, sigma, self.basis.status, self.c_hat))
            part_values.append(vals)
            self.timers["SPMV"] += t1 - t0
            self.timers["CHUZC1"] += time.perf_counter() - t1
        with self.timed("CHUZC1"):
            part_cands.append(self.price_logicals(e_hat, sigma))
            cand = Candidates.merge(part_cands)
        with self.timed("CHUZC2"):
            try:
                outcome = self.ratio_test(cand, delta, sigma)
            except DualUnbounded:
                return SolveStatus.DUAL_UNBOUNDED
            except AllTinyPivots:
                return self.numerical_trouble()
        with self.timed("FTRAN"):
            a_q = self.column(outcome.q)
            a_hat_q, spike = self.factor.ftran(a_q, partial=True, record=False)
        if not self.alpha_consistent(a_hat_q.array[p], outcome.pivot):
            return self.numerical_trouble()
        with self.timed("FTRAN-DSE"):
            tau = self.factor.ftran(e_hat, record=False)
        a_hat_f = None
        if len(outcome.flips):
            with self.timed("FTRAN-BFRT"):
                a_hat_f = self.factor.ftran(self.bfrt_column(outcome), record=False)
        self.record_solves([a_hat_q, tau] + ([a_hat_f] if a_hat_f is not None else []))
        self.apply_pivot(p, sigma, outcome, e_hat, a_row=self.assemble_row(e_hat, part_values),
                         a_hat_q=a_hat_q, spike=spike, tau=tau, a_hat_f=a_hat_f)
        return None

    def record_solves(self, results):
        for r in results:
            self.factor._record("ftran", r)

    def apply_pivot(self, p, sigma, outcome, e_hat, a_row, a_hat_q, spike, tau, a_hat_f):
        alpha = float(a_hat_q.array[p])
        with self.timed("OTHER"):
            self.objective += self.objective_change(outcome)
        with self.timed("UPDATE-DUAL"):
            self.update_duals(p, outcome, a_row)
        with self.timed("UPDATE-PRIMAL"):
            self.update_primal(p, outcome, a_hat_q, a_hat_f)
        with self.timed("UPDATE-WEIGHT"):
            self.update_weights(p, a_hat_q, tau, alpha, float(np.dot(e_hat.array, e_hat.array)))
        self.finish_pivot(p, sigma, outcome, e_hat, a_hat_q, spike, alpha)

    def finish_pivot(self, p, sigma, outcome, e_hat, a_hat_q, spike, alpha):
        out = self.change_basis(p, outcome.q, sigma)
        with self.timed("UPDATE-FACTOR"):
            ok = self.update_factor(p, spike, a_hat_q, alpha, e_hat, outcome.q, out)
        self.log_pivot(p, outcome)
        self.iterations += 1
        self.note_degeneracy(outcome)
        if not ok:
            self.reinvert()

    def numerical_trouble(self):
        if self.factor.update_count > 0:
            self.reinvert()
            return None
        self._fresh_failures = getattr(self, "_fresh_failures", 0) + 1
        if self._fresh_failures > 3:
            return SolveStatus.NUMERICAL_FAILURE
        self.reinvert()
        return None

    # ------------------------------------------------------------ termination

    def finish_optimal(self):
        """Remove cost modifications; return a status or ``None`` to keep iterating."""
        if self.cost_modified:
            with self.timed("OTHER"):
                self.cost = self.lp.cost.copy()
                self.cost_modified = False
                self.perturbed = False
                self.compute_duals()
                self.cleanup_rounds += 1
                if self.cleanup_rounds <= 5:
                    if self.correct_dual_infeasibilities():
                        self.objective = self.current_objective()
                        return None
                else:
                    viol = dual_infeasibilities(self.basis.status, self.c_hat)
                    if viol.max(initial=0.0) > self.tol.dual_tol:
                        self.warnings.append(f"residual dual infeasibility {viol.max():.2e}")
        nb = self.basis.nonbasic()
        art = nb[self.artificial[nb]]
        st = self.basis.status
        at_art = [j for j in art if (st[j] == Status.AT_UPPER and not math.isfinite(self.lp.upper[j]))
                  or (st[j] == Status.AT_LOWER and not math.isfinite(self.lp.lower[j]))]
        if at_art:
            if np.any(np.abs(self.c_hat[at_art]) > self.tol.dual_tol):
                return SolveStatus.UNBOUNDED
            self.warnings.append("artificial bound active at optimality")
        return SolveStatus.OPTIMAL

    def run(self) -> Solution:
        self._t0 = time.perf_counter()
        self.setup()
        status = None
        while status is None:
            if self.iterations >= self.opts.max_iter:
                status = SolveStatus.ITERATION_LIMIT
                break
            if time.perf_counter() - self._t0 > self.opts.time_limit:
                status = SolveStatus.TIME_LIMIT
                break
            try:
                status = self.iterate()
            except StaleFactors:
                self.reinvert()
                status = None
            if status == SolveStatus.OPTIMAL:
                status = self.finish_optimal()
            if self.opts.monitor is not None and status is None:
                self.opts.monitor(self)
        return self.solution(status)

    def solution(self, status) -> Solution:
        wall = time.perf_counter() - self._t0
        x = nonbasic_values(self.basis.status, self.lower, self.upper)
        x[self.basis.basic] = self.x_basic
        timings = dict(self.timers)
        timings["OTHER"] = 0.0
        busy = sum(timings.values())
        if busy > wall:
            scale = wall / busy
            timings = {k: v * scale for k, v in timings.items()}
        else:
            timings["OTHER"] = wall - busy
        objective = float(np.dot(self.lp.cost, x))
        if status == SolveStatus.UNBOUNDED:
            objective = -math.inf
        elif status == SolveStatus.DUAL_UNBOUNDED:
            objective = math.nan
        return Solution(status, objective, x, self.iterations, timings, list(self.pivot_log),
                        self.basis.copy(), self.c_hat.copy(),
                        {k: list(v) for k, v in self.factor.result_counts.items()},
                        wall, self.major_iterations, list(self.warnings),
                        reported_objective(self.lp, objective))


def solve_serial(lp: CompLp, options: Options | None = None) -> Solution:
    """Solve ``lp`` with the serial dual simplex engine."""
    return DualEngine(lp, options).run()
