"""Command-line front end: generate instances, solve them, check profiles, time suites."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import Direction, SolverConfig
from .instance import (
    gen_clothoid_path,
    gen_experiment1,
    gen_experiment2,
    gen_sine_path,
    load_instance,
    save_instance,
)
from .linearize import Mode
from .objective import check_feasibility, jerk_terms
from .sca import solve

EXIT_OK = 0
EXIT_BUDGET = 1
EXIT_USAGE = 2

MIN_N = {"exp1": 9, "exp2": 7, "sine": 3, "clothoid": 10}
CSV_HEADER = ("s", "w", "v", "a", "jerk")


class UsageError(Exception):
    pass


def make_instance(kind: str, n: int, seed: int):
    if kind not in MIN_N:
        raise UsageError(f"unknown instance kind {kind!r}")
    if n < MIN_N[kind]:
        raise UsageError(f"{kind} needs n >= {MIN_N[kind]}, got {n}")
    if kind == "exp1":
        return gen_experiment1(seed, n)
    if kind == "exp2":
        return gen_experiment2(seed, n)
    if kind == "sine":
        return gen_sine_path(n)
    return gen_clothoid_path(n)


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else format(x, ".17g")


def profile_rows(w, inst):
    """Rows of ``s, w, v, a, jerk``; undefined differences are ``nan``."""
    w = np.asarray(w, float)
    n, h = inst.n, inst.h
    acc = np.full(n, np.nan)
    acc[:-1] = np.diff(w) / (2.0 * h)
    jerk = np.full(n, np.nan)
    jerk[1:-1] = jerk_terms(w) / (2.0 * h * h)
    s = inst.s
    v = np.sqrt(np.maximum(w, 0.0))
    return [tuple(_fmt(float(col[i])) for col in (s, w, v, acc, jerk)) for i in range(n)]


def write_profile(path, w, inst) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_HEADER)
        out.writerows(profile_rows(w, inst))


def read_profile(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise UsageError(f"{path}: expected header {','.join(CSV_HEADER)}")
    try:
        return np.array([float(r[1]) for r in rows[1:]])
    except (IndexError, ValueError) as exc:
        raise UsageError(f"{path}: bad profile row ({exc})") from exc


def _load(path):
    try:
        return load_instance(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read instance {path}: {exc}") from exc


# Subcommands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    inst = make_instance(args.kind, args.n, args.seed)
    save_instance(inst, args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    cfg = SolverConfig(mode=Mode(args.mode), direction=Direction(args.dir), max_iter=args.max_iter)
    report = solve(inst, cfg)
    if args.csv:
        write_profile(args.csv, report.w, inst)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_dict(), fh, indent=1)
            fh.write("\n")
    print(f"{inst.name}: T = {report.objective:.10g} s, {report.iterations} iterations, "
          f"stop = {report.reason.value}, KKT = {report.kkt:.2e}")
    return EXIT_OK if report.certified else EXIT_BUDGET


def cmd_check(args) -> int:
    inst = _load(args.instance)
    w = read_profile(args.profile)
    if w.size != inst.n:
        raise UsageError(f"profile has {w.size} points, instance has {inst.n}")
    rep = check_feasibility(w, inst, args.tol)
    status = "feasible" if rep.feasible else "infeasible"
    print(f"{status}: max violation {rep.max_violation:.3e} "
          f"({rep.worst_family} at {rep.worst_index}), tol {args.tol:g}")
    return EXIT_OK if rep.feasible else EXIT_BUDGET


def _suite_instances(suite: str, n: int, repeats: int):
    if suite == "exp1":
        return [gen_experiment1(seed, n) for seed in range(repeats)]
    if suite == "exp2":
        return [gen_experiment2(seed, n) for seed in range(repeats)]
    # the third suite is deterministic, so repeats only re-time the same paths
    return [gen_sine_path(n) for _ in range(repeats)] + [gen_clothoid_path(n) for _ in range(repeats)]


def _timed_solve(inst):
    t0 = time.perf_counter()
    rep = solve(inst)
    return time.perf_counter() - t0, rep.objective, rep.certified


def _summary(values):
    return {"min": min(values), "max": max(values), "mean": statistics.fmean(values)}


def cmd_bench(args) -> int:
    if not args.sizes:
        raise UsageError("bench needs at least one size")
    workers = max(1, int(os.environ.get("JERKPLAN_THREADS", "1")))
    rows = []
    for n in args.sizes:
        if n < MIN_N["exp1" if args.suite == "exp3" else args.suite]:
            raise UsageError(f"size {n} is too small for {args.suite}")
        insts = _suite_instances(args.suite, n, args.repeats)
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_timed_solve, insts))  # map keeps seed order
        else:
            results = [_timed_solve(inst) for inst in insts]
        times = [r[0] for r in results]
        objs = [r[1] for r in results if math.isfinite(r[1])]
        rows.append({
            "n": n,
            "instances": len(insts),
            "certified": sum(r[2] for r in results),
            "time": _summary(times),
            "objective": _summary(objs) if objs else None,
        })
        print(f"n = {n}: time min {min(times):.3f} s, max {max(times):.3f} s, "
              f"mean {statistics.fmean(times):.3f} s")
    table = {"version": 1, "suite": args.suite, "repeats": args.repeats, "sizes": rows}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(table, fh, indent=1)
            fh.write("\n")
    else:
        json.dump(table, sys.stdout, indent=1)
        sys.stdout.write("\n")
    return EXIT_OK


# Parser ---------------------------------------------------------------------


def _sizes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jerkplan", description="Minimum-time speed planning with jerk limits.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an instance file")
    g.add_argument("kind", choices=sorted(MIN_N))
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.THETA_BETA.value)
    s.add_argument("--dir", choices=[d.value for d in Direction], default=Direction.HEURISTIC.value)
    s.add_argument("--max-iter", type=int, default=SolverConfig.max_iter)
    s.add_argument("--csv", help="profile output (s, w, v, a, jerk)")
    s.add_argument("--report", help="solve report output (JSON)")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="check a profile CSV against an instance")
    c.add_argument("instance")
    c.add_argument("profile")
    c.add_argument("--tol", type=float, default=1e-8)
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="time a suite of seeded instances")
    b.add_argument("suite", choices=["exp1", "exp2", "exp3"])
    b.add_argument("--sizes", type=_sizes, default=[100])
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"jerkplan: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
