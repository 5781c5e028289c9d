"""Parallelism across multiple iterations: dual suboptimization.

Each major iteration picks up to ``s`` attractive rows, computes their BTRAN
rows in parallel, performs minor iterations on that small set with the rows
kept current by rank-one updates, then brings the primal values, weights and
factors up to date with one task-parallel batch of ``2t(+1)`` FTRANs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import AllTinyPivots, DualUnbounded, FtFailure, SchedulerViolation, TinyPivot
from .dual import (Candidates, DualEngine, Options, RatioTestOutcome, SolveStatus, Solution,
                   chuzc1, dse_update)
from .factor import SparseVector
from .lp import CompLp, Status, primal_infeasibilities
from .parallel import WorkerPool


@dataclass
class Candidate:
    """A row of the candidate set with its BTRAN row kept current."""

    p: int
    alpha_init: float
    alpha: float
    row: SparseVector
    x: float
    finished: bool = False


@dataclass
class MinorRecord:
    p: int
    q: int
    leaving: int
    outcome: RatioTestOutcome
    row: SparseVector        # e_p^T B^-1 of the basis the pivot was chosen against
    a_f: np.ndarray | None   # flip column a_F, None when no flips


@dataclass
class PamiMajorState:
    candidates: dict = field(default_factory=dict)  # p -> Candidate
    records: list = field(default_factory=list)
    s: int = 8

    @property
    def t(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------- pure helpers

def top_candidates(alpha: np.ndarray, s: int, offset: int = 0) -> list[tuple[int, float]]:
    """Up to ``s`` rows with the largest positive ``alpha``; ties by lowest row."""
    pos = np.flatnonzero(alpha > 0)
    order = np.lexsort((pos, -alpha[pos]))[:s]
    return [(int(pos[k]) + offset, float(alpha[pos[k]])) for k in order]


def merge_top(blocks, s: int) -> list[tuple[int, float]]:
    """Serial merge of per-block top lists into the global top ``s``."""
    allc = [c for b in blocks for c in b]
    allc.sort(key=lambda c: (-c[1], c[0]))
    return allc[:s]


def orphan_guard(flip_flags, s: int) -> int:
    """Minor-iteration cap: ``s - 1`` if any of the first ``s - 2`` minors flipped."""
    window = max(s - 2, 0)
    return s - 1 if any(flip_flags[:window]) else s


def apply_apf_inverse(v: np.ndarray, row: np.ndarray, d: np.ndarray, denom: float) -> np.ndarray:
    """``T^-1 v`` for ``T = I + d row^T``: ``v - d (row . v) / denom``."""
    s = float(np.dot(row, v))
    return v - d * (s / denom) if s != 0.0 else v.copy()


def combined_bfrt_rhs(records) -> np.ndarray | None:
    """Fold the flip columns through the preceding rank-one factors (Horner).

    ``records`` is a sequence of ``(row_i, d_i, a_F_i)`` with ``row_i`` the
    BTRAN row of pivot ``i`` (dense), ``d_i = a_q - a_leaving`` and ``a_F_i``
    the flip column or ``None``. Returns ``sum_i T_0^-1 ... T_{i-1}^-1 a_F_i``
    or ``None`` when no pivot flipped.
    """
    last = max((i for i, r in enumerate(records) if r[2] is not None), default=None)
    if last is None:
        return None
    acc = np.array(records[last][2], dtype=float)
    for i in range(last - 1, -1, -1):
        row, d, _ = records[i]
        acc = apply_apf_inverse(acc, row, d, 1.0 + float(np.dot(row, d)))
        if records[i][2] is not None:
            acc = acc + records[i][2]
    return acc


def apply_pf(v: SparseVector, p: int, eta: SparseVector, pivot: float) -> SparseVector:
    """Product-form eta for a pivot on ``eta`` (the FTRAN column) at position ``p``."""
    x = v.array
    xp = x[p]
    if xp == 0.0:
        return v
    xp /= pivot
    idx = eta.index[eta.index != p]
    x[idx] -= eta.array[idx] * xp
    x[p] = xp
    v.index = np.union1d(v.index, eta.index)
    return v


# ---------------------------------------------------------------- engine

class PamiEngine(DualEngine):
    engine_name = "pami"

    def __init__(self, lp: CompLp, options: Options | None = None):
        options = options or Options()
        super().__init__(lp, options, parts=options.workers)
        self.pool = WorkerPool(options.workers)
        self.task_log: list[dict] = []
        self.cap_log: list[tuple[list, int]] = []
        self.minor_log: list[tuple[int, float, float]] = []  # (p, alpha, alpha_init) at selection

    # ------------------------------------------------------------ major CHUZR

    def major_chuzr(self, s: int):
        alpha = self.alpha_of(None)
        blocks = self.pool.map_blocks(lambda lo, hi: top_candidates(alpha[lo:hi], s, lo), len(alpha))
        return merge_top(blocks, s)

    # ------------------------------------------------------------ minors

    def minor_init(self, chosen) -> PamiMajorState:
        m = self.m
        tasks = [(lambda p=p: self.factor.btran(SparseVector.unit(m, p), record=False)) for p, _ in chosen]
        rows = self.pool.run(tasks)
        for r in rows:
            self.factor._record("btran", r)
        state = PamiMajorState(s=self.opts.s)
        for (p, a), row in zip(chosen, rows):
            state.candidates[p] = Candidate(p, a, a, row, float(self.x_basic[p]))
        return state

    def minor_chuzr(self, state: PamiMajorState):
        psi = self.opts.cutoff
        best = None
        for p in sorted(state.candidates):
            c = state.candidates[p]
            if c.finished:
                continue
            if c.alpha <= 0 or (state.t > 0 and c.alpha < psi * c.alpha_init):
                del state.candidates[p]
                continue
            if best is None or c.alpha > best.alpha:
                best = c
        return best

    def minor_ratio_test(self, cand: Candidate):
        sigma, delta = self.leaving_direction(cand.p, cand.x)
        e_hat = cand.row
        t0 = time.perf_counter()
        results = self.pool.run([(lambda k=k: self._price_task(k, e_hat, sigma))
                                 for k in range(len(self.pricer.parts))])
        wall = time.perf_counter() - t0
        spmv = sum(r[2] for r in results)
        c1 = sum(r[3] for r in results)
        if spmv + c1 > 0:
            self.timers["SPMV"] += wall * spmv / (spmv + c1)
            self.timers["CHUZC1"] += wall * c1 / (spmv + c1)
        with self.timed("CHUZC1"):
            cands = [r[1] for r in results] + [self.price_logicals(e_hat, sigma)]
            merged = Candidates.merge(cands)
        with self.timed("CHUZC2"):
            outcome = self.ratio_test(merged, delta, sigma)
        a_row = self.assemble_row(e_hat, [r[0] for r in results])
        return sigma, outcome, a_row

    def _price_task(self, k, e_hat, sigma):
        t0 = time.perf_counter()
        part = self.pricer.parts[k]
        vals = part.price(e_hat)
        t1 = time.perf_counter()
        cand = chuzc1(part.cols, vals, sigma, self.basis.status, self.c_hat)
        return vals, cand, t1 - t0, time.perf_counter() - t1

    def minor_update(self, state: PamiMajorState, cand: Candidate, sigma: int, outcome: RatioTestOutcome,
                     a_row: np.ndarray):
        p, q = cand.p, outcome.q
        x_q = self.nonbasic_value(q)
        self.objective += self.objective_change(outcome)
        with self.timed("UPDATE-DUAL"):
            self.update_duals_parallel(p, outcome, a_row)
        a_q = self.column(q)
        a_f = self.bfrt_column(outcome).array if len(outcome.flips) else None
        with self.timed("UPDATE-PRIMAL"):
            st = self.basis.status
            for j in outcome.flips:
                st[j] = Status.AT_UPPER if st[j] == Status.AT_LOWER else Status.AT_LOWER
        leaving = self.change_basis(p, q, sigma)
        state.records.append(MinorRecord(p, q, leaving, outcome, cand.row, a_f))
        pivot = outcome.pivot
        e_p = cand.row.array
        with self.timed("BTRAN"):
            for other in state.candidates.values():
                if other is cand:
                    continue
                e_i = other.row.array
                a_iq = float(np.dot(e_i[a_q.index], a_q.array[a_q.index]))
                other.x -= outcome.theta_primal * a_iq
                if a_f is not None:
                    other.x -= float(np.dot(e_i, a_f))
                if a_iq != 0.0:
                    other.row = SparseVector.from_dense(e_i - (a_iq / pivot) * e_p)
                    other.row.tidy(self.tol.zero_drop)
            cand.row = SparseVector.from_dense(e_p / pivot)
            cand.x = x_q + outcome.theta_primal
            cand.finished = True
        with self.timed("CHUZR"):
            for other in state.candidates.values():
                if other.finished:
                    continue
                j = self.basis.basic[other.p]
                d = primal_infeasibilities(other.x, self.lower[j], self.upper[j])
                if d <= self.tol.primal_tol:
                    other.alpha = 0.0
                else:
                    w = float(np.dot(other.row.array, other.row.array))
                    other.alpha = float(d / np.sqrt(w)) if w > 0 else 0.0

    def update_duals_parallel(self, p, outcome, a_row):
        density = np.count_nonzero(a_row) / max(len(a_row), 1)
        if self.pool.workers == 1 or density < self.opts.density_revert or outcome.theta_dual == 0.0:
            self.update_duals(p, outcome, a_row)
            return
        q = outcome.q
        if outcome.shift:
            self.cost[q] -= self.c_hat[q]
            self.c_hat[q] = 0.0
            self.cost_modified = True
        c, th = self.c_hat, outcome.theta_dual

        def block(lo, hi):
            c[lo:hi] -= th * a_row[lo:hi]

        self.pool.map_blocks(block, len(c))
        c[self.basis.basic] = 0.0
        c[self.basis.basic[p]] = -th
        c[q] = 0.0

    # ------------------------------------------------------------ major update

    def major_update_ftrans(self, state: PamiMajorState):
        recs = state.records
        t = len(recs)
        fold = combined_bfrt_rhs([(r.row.array, self.column(r.q).array - self.column(r.leaving).array, r.a_f)
                                  for r in recs])
        f = self.factor
        tasks = [(lambda r=r: ("FTRAN", f.ftran(self.column(r.q), partial=True, record=False))) for r in recs]
        tasks += [(lambda r=r: ("FTRAN-DSE", f.ftran(r.row, record=False))) for r in recs]
        if fold is not None:
            rhs = SparseVector.from_dense(fold)
            tasks.append(lambda: ("FTRAN-BFRT", f.ftran(rhs, record=False)))
        expected = 2 * t + (1 if fold is not None else 0)
        if len(tasks) != expected:
            raise SchedulerViolation(f"{len(tasks)} factor solves for t={t}")
        timed_tasks = [(lambda fn=fn: _clocked(fn)) for fn in tasks]
        t0 = time.perf_counter()
        out = self.pool.run(timed_tasks)
        wall = time.perf_counter() - t0
        per_worker = self.pool.assignments[-1]
        self.task_log.append({"t": t, "flips": fold is not None, "tasks": len(tasks),
                              "max_per_worker": max(per_worker), "workers": self.pool.workers})
        busy = sum(d for _, d in out) or 1.0
        for (label, _), d in out:
            self.timers[label] += wall * d / busy
        cols = [o[0][1][0] for o in out[:t]]
        spikes = [o[0][1][1] for o in out[:t]]
        taus = [o[0][1] for o in out[t:2 * t]]
        bfrt = out[2 * t][0][1] if fold is not None else None
        for k in range(t):
            f._record("ftran", cols[k])
            f._record("ftran", taus[k])
        if bfrt is not None:
            f._record("ftran", bfrt)
        # update parts: bring results for pivot i up to date with pivots j < i
        with self.timed("FTRAN"):
            for i in range(1, t):
                for j in range(i):
                    cols[i] = apply_pf(cols[i], recs[j].p, cols[j], cols[j].array[recs[j].p])
        with self.timed("FTRAN-DSE"):
            for i in range(1, t):
                for j in range(i):
                    taus[i] = apply_pf(taus[i], recs[j].p, cols[j], cols[j].array[recs[j].p])
        return cols, spikes, taus, bfrt

    def major_update_vectors(self, state: PamiMajorState, cols, taus, bfrt):
        recs = state.records
        x = self.x_basic
        with self.timed("UPDATE-PRIMAL"):
            for r, col in zip(recs, cols):
                x[col.index] -= r.outcome.theta_primal * col.array[col.index]
            if bfrt is not None:
                x[bfrt.index] -= bfrt.array[bfrt.index]
            for r in recs:
                x[r.p] = state.candidates[r.p].x
        with self.timed("UPDATE-WEIGHT"):
            for r, col, tau in zip(recs, cols, taus):
                e = r.row.array
                self.update_weights(r.p, col, tau, float(col.array[r.p]), float(np.dot(e, e)))
        self.heap.invalidate()

    def major_update_factor(self, state: PamiMajorState, cols, spikes) -> bool:
        recs = state.records
        f = self.factor
        if f.update_count + len(recs) > f.refactor_limit:
            return False
        kind = self.opts.update
        try:
            if kind == "ft":
                f.collective_ft_update([(r.p, s, float(c.array[r.p])) for r, s, c in zip(recs, spikes, cols)])
            elif kind == "pf":
                for r, c in zip(recs, cols):
                    f.append_pf_update(r.p, c)
            else:
                for r in recs:
                    f.append_apf_update(r.row, self.column(r.q), self.column(r.leaving))
        except (FtFailure, TinyPivot):
            return False
        return f.update_count < f.refactor_limit

    # ------------------------------------------------------------ iteration

    def iterate(self):
        s = self.opts.s
        with self.timed("CHUZR"):
            chosen = self.major_chuzr(s)
        if not chosen:
            return SolveStatus.OPTIMAL
        t0 = time.perf_counter()
        state = self.minor_init(chosen)
        self.timers["BTRAN"] += time.perf_counter() - t0
        flip_flags = []
        tiny = 0
        while True:
            cap = orphan_guard(flip_flags, s)
            if state.t >= cap:
                break
            with self.timed("CHUZR"):
                cand = self.minor_chuzr(state)
            if cand is None:
                break
            alpha_sel = cand.alpha
            try:
                sigma, outcome, a_row = self.minor_ratio_test(cand)
            except DualUnbounded:
                if state.t == 0:
                    return SolveStatus.DUAL_UNBOUNDED
                break
            except AllTinyPivots:
                tiny += 1
                del state.candidates[cand.p]
                continue
            self.minor_log.append((cand.p, alpha_sel, cand.alpha_init))
            self.minor_update(state, cand, sigma, outcome, a_row)
            flip_flags.append(len(outcome.flips) > 0)
        self.cap_log.append((flip_flags, orphan_guard(flip_flags, s)))
        if state.t == 0:
            return self.numerical_trouble()
        cols, spikes, taus, bfrt = self.major_update_ftrans(state)
        consistent = all(self.alpha_consistent(c.array[r.p], r.outcome.pivot) for r, c in zip(state.records, cols))
        if consistent:
            self.major_update_vectors(state, cols, taus, bfrt)
        for r in state.records:
            self.log_pivot(r.p, r.outcome)
            self.iterations += 1
            self.note_degeneracy(r.outcome)
        self.major_iterations += 1
        if not consistent:
            self.warnings.append("pivot mismatch after minor iterations; reinverting")
            self.reinvert()
            with self.timed("UPDATE-WEIGHT"):
                self.compute_weights()
            return None
        with self.timed("UPDATE-FACTOR"):
            ok = self.major_update_factor(state, cols, spikes)
        if not ok:
            self.reinvert()
        return None

    def run(self) -> Solution:
        try:
            return super().run()
        finally:
            self.pool.close()


def _clocked(fn):
    t0 = time.perf_counter()
    res = fn()
    return res, time.perf_counter() - t0


def solve_pami(lp: CompLp, options: Options | None = None) -> Solution:
    """Solve ``lp`` with the suboptimization engine."""
    return PamiEngine(lp, options).run()
