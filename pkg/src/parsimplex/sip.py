"""Single-iteration parallelism: a fixed task graph per dual simplex iteration.

After CHUZR and BTRAN, FTRAN-DSE runs alongside the logical and structural
CHUZC1 tasks; after CHUZC2, FTRAN, the optional FTRAN-BFRT and UPDATE-DUAL run
together. The arithmetic is that of the serial engine, so the pivot sequence
is the same for any worker count.
"""

from __future__ import annotations

import threading
import time

import numpy as np

from .errors import AllTinyPivots, DualUnbounded
from .dual import Candidates, DualEngine, Options, SolveStatus, Solution, chuzc1
from .lp import CompLp
from .parallel import WorkerPool


class SipEngine(DualEngine):
    engine_name = "sip"

    def __init__(self, lp: CompLp, options: Options | None = None):
        options = options or Options()
        # two lanes go to FTRAN-DSE and the logical CHUZC1; the rest price structurals
        super().__init__(lp, options, parts=max(1, options.workers - 2))
        self.pool = WorkerPool(options.workers)
        self.order_log: list[tuple[int, str, str]] = []
        self._lock = threading.Lock()

    def _event(self, name, what):
        with self._lock:
            self.order_log.append((self.iterations, name, what))

    def _task(self, name, fn):
        def run():
            self._event(name, "start")
            t0 = time.perf_counter()
            res = fn()
            d = time.perf_counter() - t0
            self._event(name, "end")
            return name, res, d
        return run

    def _phase(self, tasks):
        t0 = time.perf_counter()
        out = self.pool.run(tasks)
        wall = time.perf_counter() - t0
        busy = sum(d for _, _, d in out) or 1.0
        for name, _, d in out:
            label = name.split("-")[0] if name.startswith(("CHUZC1", "SPMV")) else name
            self.timers[label] += wall * d / busy
        return {name: res for name, res, _ in out}

    def _serial(self, name, fn):
        self._event(name, "start")
        with self.timed(name):
            res = fn()
        self._event(name, "end")
        return res

    def iterate(self):
        p = self._serial("CHUZR", self.chuzr)
        if p is None:
            return SolveStatus.OPTIMAL
        e_hat = self._serial("BTRAN", lambda: self.btran_row(p))
        sigma, delta = self.leaving_direction(p)
        f = self.factor

        def price(k):
            part = self.pricer.parts[k]
            vals = part.price(e_hat)
            return vals, chuzc1(part.cols, vals, sigma, self.basis.status, self.c_hat)

        tasks = [self._task("FTRAN-DSE", lambda: f.ftran(e_hat, record=False)),
                 self._task("CHUZC1-logical", lambda: self.price_logicals(e_hat, sigma))]
        tasks += [self._task(f"SPMV-{k}", lambda k=k: price(k)) for k in range(len(self.pricer.parts))]
        res = self._phase(tasks)
        tau = res["FTRAN-DSE"]
        part_values = [res[f"SPMV-{k}"][0] for k in range(len(self.pricer.parts))]
        cand = Candidates.merge([res[f"SPMV-{k}"][1] for k in range(len(self.pricer.parts))]
                                + [res["CHUZC1-logical"]])
        try:
            outcome = self._serial("CHUZC2", lambda: self.ratio_test(cand, delta, sigma))
        except DualUnbounded:
            return SolveStatus.DUAL_UNBOUNDED
        except AllTinyPivots:
            return self.numerical_trouble()

        a_row = self.assemble_row(e_hat, part_values)
        df = self.objective_change(outcome)
        a_q = self.column(outcome.q)
        tasks = [self._task("FTRAN", lambda: f.ftran(a_q, partial=True, record=False))]
        if len(outcome.flips):
            a_f = self.bfrt_column(outcome)
            tasks.append(self._task("FTRAN-BFRT", lambda: f.ftran(a_f, record=False)))
        c_hat_before = self.c_hat.copy()
        cost_before = self.cost[outcome.q]
        modified_before = self.cost_modified
        tasks.append(self._task("UPDATE-DUAL", lambda: self.update_duals(p, outcome, a_row)))
        res = self._phase(tasks)
        a_hat_q, spike = res["FTRAN"]
        a_hat_f = res.get("FTRAN-BFRT")
        if not self.alpha_consistent(a_hat_q.array[p], outcome.pivot):
            # undo the speculative dual update before recovering
            self.c_hat = c_hat_before
            self.cost[outcome.q] = cost_before
            self.cost_modified = modified_before
            return self.numerical_trouble()
        self.record_solves([a_hat_q, tau] + ([a_hat_f] if a_hat_f is not None else []))
        self.objective += df
        alpha = float(a_hat_q.array[p])
        self._serial("UPDATE-WEIGHT", lambda: self.update_weights(
            p, a_hat_q, tau, alpha, float(np.dot(e_hat.array, e_hat.array))))
        self._serial("UPDATE-PRIMAL", lambda: self.update_primal(p, outcome, a_hat_q, a_hat_f))
        self._event("UPDATE-FACTOR", "start")
        self.finish_pivot(p, sigma, outcome, e_hat, a_hat_q, spike, alpha)
        self._event("UPDATE-FACTOR", "end")
        return None

    def run(self) -> Solution:
        try:
            return super().run()
        finally:
            self.pool.close()


def solve_sip(lp: CompLp, options: Options | None = None) -> Solution:
    """Solve ``lp`` with the single-iteration task-parallel engine."""
    return SipEngine(lp, options).run()
