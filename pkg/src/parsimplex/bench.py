"""Run reports, hyper-sparsity measures, performance profiles and speedups."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dual import COMPONENTS, Solution
from .errors import MismatchedSets

HYPER_DENSITY = 0.10
HYPER_SHARE = 60.0
CSV_FIELDS = ["model", "engine", "workers", "status", "objective", "iters", "wall_s",
              *COMPONENTS, "ftran_hs_pct", "btran_hs_pct"]


@dataclass
class RunReport:
    model: str
    engine: str
    workers: int
    status: str
    objective: float
    iterations: int
    wall_time: float
    components: dict = field(default_factory=dict)
    ftran_hs_pct: float = 0.0
    btran_hs_pct: float = 0.0

    @classmethod
    def from_solution(cls, model: str, engine: str, workers: int, sol: Solution) -> "RunReport":
        f, b = hyper_sparsity_measure(sol.result_counts)
        return cls(model, engine, workers, str(sol.status.value), sol.reported_objective, sol.iterations,
                   sol.wall_time, {k: sol.timings.get(k, 0.0) for k in COMPONENTS}, f, b)

    def row(self) -> dict:
        out = {"model": self.model, "engine": self.engine, "workers": self.workers, "status": self.status,
               "objective": self.objective, "iters": self.iterations, "wall_s": self.wall_time}
        out.update({k: self.components.get(k, 0.0) for k in COMPONENTS})
        out["ftran_hs_pct"] = self.ftran_hs_pct
        out["btran_hs_pct"] = self.btran_hs_pct
        return out

    def profile_lines(self) -> list[str]:
        """Component percentages of the wall time, in the fixed component order."""
        total = self.wall_time or 1.0
        return [f"  {k:<14}{100.0 * self.components.get(k, 0.0) / total:6.1f}%" for k in COMPONENTS]


def hyper_sparsity_measure(run) -> tuple[float, float]:
    """Percentages of FTRAN and BTRAN results with density below 10%.

    ``run`` is a :class:`RunReport`, a :class:`Solution` or the factor's
    ``{"ftran": [count, hyper], "btran": [...]}`` tally.
    """
    if isinstance(run, RunReport):
        return run.ftran_hs_pct, run.btran_hs_pct
    counts = run.result_counts if isinstance(run, Solution) else run

    def pct(kind):
        total, hyper = counts.get(kind, (0, 0))
        return 100.0 * hyper / total if total else 0.0

    return pct("ftran"), pct("btran")


def is_hyper_sparse(ftran_pct: float, btran_pct: float, share: float = HYPER_SHARE) -> bool:
    """A run counts as hyper-sparse when either measure exceeds ``share`` percent."""
    return ftran_pct > share or btran_pct > share


def performance_profile(times: dict, rho_max: float | None = None) -> dict:
    """Step curves ``engine -> [(rho, fraction), ...]``.

    ``times`` maps model -> engine -> seconds, with ``inf`` (or ``None``) for
    a failure. Each curve starts at ``rho = 1`` and ends at ``rho_max``, which
    defaults to the largest finite ratio.
    """
    models = sorted(times)
    engines = sorted({e for m in models for e in times[m]})
    if not models:
        return {e: [] for e in engines}
    ratios = {e: [] for e in engines}
    for m in models:
        row = {e: _seconds(times[m].get(e)) for e in engines}
        best = min(row.values())
        for e in engines:
            t = row[e]
            if not math.isfinite(t):
                ratios[e].append(math.inf)
            elif best > 0:
                ratios[e].append(t / best)
            else:
                ratios[e].append(1.0 if t == best else math.inf)
    finite = [r for rs in ratios.values() for r in rs if math.isfinite(r)]
    if rho_max is None:
        rho_max = max(finite, default=1.0)
    n = len(models)
    curves = {}
    for e in engines:
        r = np.array(ratios[e])
        steps = sorted({1.0, rho_max} | {float(x) for x in r if math.isfinite(x) and 1.0 < x <= rho_max})
        curves[e] = [(rho, float(np.count_nonzero(r <= rho)) / n) for rho in steps]
    return curves


def _seconds(t) -> float:
    return math.inf if t is None else float(t)


def profile_csv(curves: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["engine", "rho", "fraction"])
    for e in sorted(curves):
        for rho, frac in curves[e]:
            w.writerow([e, repr(rho), repr(frac)])
    return buf.getvalue()


def geometric_mean_speedup(base: dict, test: dict) -> float:
    """``exp(mean(ln(base/test)))`` over matched models (dicts model -> seconds)."""
    if set(base) != set(test):
        raise MismatchedSets("base and test cover different models")
    if not base:
        raise MismatchedSets("no models")
    logs = []
    for m in sorted(base):
        b, t = float(base[m]), float(test[m])
        if not (b > 0 and t > 0):
            raise ValueError(f"nonpositive time for {m!r}")
        logs.append(math.log(b / t))
    return math.exp(sum(logs) / len(logs))


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()
