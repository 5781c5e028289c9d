"""Command-line front end: solve MPS models and write run reports."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .bench import (RunReport, geometric_mean_speedup, is_hyper_sparse, performance_profile,
                    profile_csv, reports_csv)
from .dual import Options, SolveStatus, solve_serial
from .errors import SimplexError
from .generate import random_suite
from .mps import ParseError, read_mps
from .pami import solve_pami
from .sip import solve_sip

ENGINES = {"serial": solve_serial, "pami": solve_pami, "sip": solve_sip}
EXIT_CODES = {
    SolveStatus.OPTIMAL: 0,
    SolveStatus.DUAL_UNBOUNDED: 3,
    SolveStatus.UNBOUNDED: 4,
    SolveStatus.ITERATION_LIMIT: 5,
    SolveStatus.TIME_LIMIT: 5,
    SolveStatus.NUMERICAL_FAILURE: 6,
}
EXIT_ERROR = 7


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parsimplex", description="Dual revised simplex solver (serial, pami, sip).")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--mps", metavar="FILE", help="solve one MPS file")
    src.add_argument("--dir", metavar="DIR", help="solve every *.mps file in DIR")
    src.add_argument("--random", metavar="N", type=int, help="solve N generated random models")
    ap.add_argument("--engine", default="serial",
                    help="serial, pami or sip; a comma-separated list compares engines")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--s", type=int, default=8, help="suboptimization width for pami")
    ap.add_argument("--cutoff", type=float, default=0.95, help="candidate cutoff factor for pami")
    ap.add_argument("--density-revert", type=float, default=0.10)
    ap.add_argument("--update", choices=("ft", "pf", "apf"), default="ft")
    ap.add_argument("--iter-limit", type=int, default=1_000_000)
    ap.add_argument("--time-limit", type=float, default=math.inf)
    ap.add_argument("--report", choices=("json", "csv", "text"), default="text")
    ap.add_argument("--pivot-log", metavar="FILE")
    ap.add_argument("--profile", metavar="FILE", help="performance-profile CSV when comparing engines")
    ap.add_argument("--fixed", action="store_true", help="read MPS in fixed format")
    ap.add_argument("--seed", type=int, default=0)
    return ap


def _models(args):
    if args.mps:
        yield Path(args.mps).stem, lambda: read_mps(args.mps, fixed=args.fixed)
    elif args.dir:
        files = sorted(Path(args.dir).glob("*.mps"))
        if not files:
            raise FileNotFoundError(f"no .mps files in {args.dir}")
        for f in files:
            yield f.stem, (lambda f=f: read_mps(f, fixed=args.fixed))
    else:
        for lp in random_suite(args.random, seed=args.seed):
            yield lp.name, (lambda lp=lp: lp)


def _text(rep: RunReport) -> str:
    lines = [f"model {rep.model}  engine {rep.engine}  workers {rep.workers}",
             f"  status      {rep.status}",
             f"  objective   {rep.objective:.12g}",
             f"  iterations  {rep.iterations}",
             f"  wall time   {rep.wall_time:.4f} s",
             f"  hyper-sparse FTRAN {rep.ftran_hs_pct:.1f}%  BTRAN {rep.btran_hs_pct:.1f}%"
             f"  ({'hyper-sparse' if is_hyper_sparse(rep.ftran_hs_pct, rep.btran_hs_pct) else 'not hyper-sparse'})"]
    return "\n".join(lines + rep.profile_lines())


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    engines = [e.strip() for e in args.engine.split(",") if e.strip()]
    bad = [e for e in engines if e not in ENGINES]
    if bad or not engines:
        print(f"parsimplex: unknown engine {','.join(bad) or args.engine!r}", file=sys.stderr)
        return 2
    if args.workers < 1 or args.s < 1:
        print("parsimplex: --workers and --s must be >= 1", file=sys.stderr)
        return 2
    try:
        opts = Options(max_iter=args.iter_limit, time_limit=args.time_limit, update=args.update,
                       workers=args.workers, s=args.s, cutoff=args.cutoff,
                       density_revert=args.density_revert, seed=args.seed)
    except ValueError as e:
        print(f"parsimplex: {e}", file=sys.stderr)
        return 2

    reports, logs, code = [], [], 0
    try:
        for name, load in _models(args):
            lp = load()
            for engine in engines:
                sol = ENGINES[engine](lp, opts)
                reports.append(RunReport.from_solution(name, engine, args.workers, sol))
                if len(engines) > 1 or args.dir or args.random:
                    logs.append(f"# {name} {engine}")
                logs.extend(sol.pivot_log)
                code = code or EXIT_CODES[sol.status]
    except (ParseError, OSError, SimplexError, ValueError) as e:
        print(f"parsimplex: {e}", file=sys.stderr)
        return EXIT_ERROR

    if args.report == "csv":
        sys.stdout.write(reports_csv(reports))
    elif args.report == "json":
        json.dump([r.row() for r in reports], sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
    else:
        print("\n\n".join(_text(r) for r in reports))
        if len(engines) > 1:
            print(_speedups(reports, engines))
    if args.pivot_log:
        Path(args.pivot_log).write_text("\n".join(logs) + ("\n" if logs else ""))
    if args.profile and len(engines) > 1:
        Path(args.profile).write_text(profile_csv(performance_profile(_times(reports))))
    return code


def _times(reports) -> dict:
    times: dict = {}
    for r in reports:
        times.setdefault(r.model, {})[r.engine] = r.wall_time if r.status == "optimal" else math.inf
    return times


def _speedups(reports, engines) -> str:
    times = _times(reports)
    base = engines[0]
    lines = [f"geometric-mean speedup relative to {base}:"]
    for e in engines[1:]:
        ok = [m for m in times if math.isfinite(times[m][base]) and math.isfinite(times[m][e])]
        if ok:
            g = geometric_mean_speedup({m: times[m][base] for m in ok}, {m: times[m][e] for m in ok})
            lines.append(f"  {e:<8}{g:.3f}  ({len(ok)} models)")
    return "\n".join(lines)


if __name__ == "__main__":
    sys.exit(main())
