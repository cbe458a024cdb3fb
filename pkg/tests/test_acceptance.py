"""End-to-end acceptance checks; each prints a PASS/FAIL line in the summary."""

import dataclasses
import math
import statistics
import time

import numpy as np
import pytest

from jerkplan.acc import solve_acc
from jerkplan.accnar import extract_multipliers, solve_accnar, solve_accnar_raw
from jerkplan.config import Direction, SolverConfig
from jerkplan.descent import _trust_region, assumption_42, compute_update, par_violation
from jerkplan.instance import gen_clothoid_path, gen_experiment1, gen_experiment2, gen_sine_path
from jerkplan.linearize import build, raw_coefficients
from jerkplan.lp import MAX_PIVOTS, solve_lp
from jerkplan.nar import solve_nar
from jerkplan.objective import check_feasibility, jerk_terms
from jerkplan.oracle import acc_rows, enumerate_lp, fixpoint_max, nar_rows
from jerkplan.sca import _clean, null_start_scale, solve
from jerkplan.tridiag import solve as thomas
from support import (
    dense_tridiag, diag_dominant, early_iterates, random_direction_lp, random_instance,
    random_model, random_monotone_data, scaled_feasible,
)

_runs = {}


def run(kind, n, seed=0):
    """Solve once per session and keep the report and the wall time."""
    key = (kind, n, seed)
    if key not in _runs:
        inst = {"exp1": lambda: gen_experiment1(seed, n), "exp2": lambda: gen_experiment2(seed, n),
                "sine": lambda: gen_sine_path(n), "clothoid": lambda: gen_clothoid_path(n)}[kind]()
        t0 = time.perf_counter()
        rep = solve(inst)
        _runs[key] = (inst, rep, time.perf_counter() - t0)
    return _runs[key]


def test_criterion_1_subsolvers_match_fixpoint(record_property):
    rng = np.random.default_rng(101)
    worst = {"acc": 0.0, "nar": 0.0, "accnar": 0.0}
    t0 = time.perf_counter()
    for k in range(500):
        n = int(rng.integers(3, 51))
        if k % 2:
            y, bA, bD, coef, bN, present = random_monotone_data(rng, n)
        else:
            _, _, m = random_model(rng, max(n, 4))
            n = m.n
            y = m.uB * rng.uniform(0.0, 1.0, n)
            bA, bD, coef, bN, present = m.bA, m.bD, m.nar_coef, m.bN, m.nar_rows
        ra, rn = acc_rows(bA, bD), nar_rows(coef, bN, present)
        worst["acc"] = max(worst["acc"], np.max(np.abs(solve_acc(y, bA, bD) - fixpoint_max(y, ra))))
        worst["nar"] = max(worst["nar"], np.max(np.abs(solve_nar(y, coef, bN, present) - fixpoint_max(y, rn))))
        joint, _ = solve_accnar_raw(y, bA, bD, coef, bN, present, 1e-8)
        worst["accnar"] = max(worst["accnar"], np.max(np.abs(joint - fixpoint_max(y, ra + rn))))
    elapsed = time.perf_counter() - t0
    record_property("detail", "max deviation " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
                    + f" (limit 1e-7); {elapsed:.1f} s (limit 30 s)")
    assert max(worst.values()) <= 1e-7
    assert elapsed < 30.0


def test_criterion_2_thomas_matches_dense(record_property):
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(1000):
        a, b, c, d = diag_dominant(rng, int(rng.integers(1, 201)))
        ref = np.linalg.solve(dense_tridiag(a, b, c), d)
        worst = max(worst, np.max(np.abs(thomas(a, b, c, d) - ref)) / np.max(np.abs(ref)))
    record_property("detail", f"max relative error {worst:.1e} (limit 1e-10)")
    assert worst <= 1e-10


def test_criterion_3_linearization_signs_and_ordering(record_property):
    rng = np.random.default_rng(303)
    low_rhs, order, eq_up, eq_low, strict = 0.0, 0.0, 0.0, 0.0, 0
    active_up = active_low = 0
    for k in range(10_000):
        inst = random_instance(rng, int(rng.integers(4, 31)))
        w = scaled_feasible(rng, inst, zeros=k % 4 == 0)
        raw = raw_coefficients(w, inst)
        low_rhs = min(low_rhs, *(arr.min() for arr in (raw.bA, raw.bD, raw.bP, raw.bN)))
        mk = raw.active_mask
        if not mk.any():
            continue
        order = max(order, np.max(raw.beta[mk] - raw.eta[mk]), np.max(raw.eta[mk] - raw.theta[mk]))
        lim = 2.0 * inst.h**2 * inst.J
        jt = np.zeros(inst.n)
        jt[1:-1] = jerk_terms(w)
        up = mk & (jt >= lim * (1 - 1e-12))
        down = mk & (jt <= -lim * (1 - 1e-12))
        active_up += int(up.sum())
        active_low += int(down.sum())
        if up.any():
            eq_up = max(eq_up, np.max(raw.theta[up] - raw.eta[up]))
        if down.any():
            eq_low = max(eq_low, np.max(raw.eta[down] - raw.beta[down]))
        # away from activity the ordering is strict
        slack = mk & (np.abs(jt) <= lim * (1 - 1e-6))
        strict += int(np.sum((raw.theta[slack] - raw.eta[slack] <= 0) | (raw.eta[slack] - raw.beta[slack] <= 0)))
    record_property("detail", f"min rhs {low_rhs:.1e} (limit -1e-12); ordering excess {order:.1e}; "
                    f"active-row gaps {eq_up:.1e}/{eq_low:.1e} over {active_up}/{active_low} rows "
                    f"(limit 1e-9); non-strict inactive rows {strict}")
    assert low_rhs >= -1e-12 and order <= 1e-12
    assert eq_up <= 1e-9 and eq_low <= 1e-9 and active_up > 0 and active_low > 0
    assert strict == 0


CRIT4_RUNS = [("exp1", 0), ("exp1", 1), ("exp1", 2), ("exp2", 0), ("exp2", 1), ("exp2", 2),
              ("sine", 0), ("clothoid", 0)]


def test_criterion_4_full_steps_stay_feasible(record_property):
    lines, ok = [], True
    for kind, seed in CRIT4_RUNS:
        inst, rep, _ = run(kind, 100, seed)
        full = all(a == 1.0 for a in rep.alphas[1:])
        ok &= full and rep.backtracks == 0 and rep.max_violation <= 1e-8
        lines.append(f"{kind}-{seed}: {rep.iterations} it, 42 violated in {rep.violated_42}, "
                     f"restricted {rep.restricted_steps}")
    # constructed case: the second step breaks the step-size assumption
    inst = gen_experiment1(0, 12)
    cfg = SolverConfig()
    first = compute_update(np.zeros(12), build(np.zeros(12), inst), cfg, 1.0)
    w = _clean(null_start_scale(first.dw, inst) * first.dw, inst)
    m = build(w, inst)
    raw = _trust_region(m, cfg, float(np.max(w)), False)
    constructed = assumption_42(raw.dw, w).size > 0 and np.any(par_violation(raw.dw, m) > 1e-9)
    upd = compute_update(w, m, cfg, float(np.max(w)))
    repaired = upd.restricted and check_feasibility(_clean(w + upd.dw, inst), inst, 1e-8).feasible
    record_property("detail", "; ".join(lines) + f"; constructed restriction repaired: {constructed and repaired}")
    assert ok and constructed and repaired


def test_criterion_5_multipliers_match_finite_differences(record_property):
    rng = np.random.default_rng(505)
    eps = 1e-5
    compared, worst, skipped = 0, 0.0, 0
    for _ in range(50):
        inst, w, m = random_model(rng, int(rng.integers(5, 13)))
        w = np.maximum(w, 0.05 * inst.u)  # keep the gradient finite
        w[0] = w[-1] = 0.0
        w = scaled_feasible(np.random.default_rng(int(rng.integers(1 << 30))), dataclasses.replace(inst, u=w))
        if np.any(w[1:-1] <= 0):
            continue
        m = build(w, inst)
        y = m.lB + (m.uB - m.lB) * rng.uniform(0.3, 0.95, m.n)
        y[0] = y[-1] = 0.0
        res = solve_accnar(y, m)
        cert = extract_multipliers(res.dw, y, m)
        if cert.degenerate:
            skipped += 1
            continue
        F = lambda v: solve_accnar(v, m, 1e-13).value
        f0 = F(y)
        for i in range(1, m.n - 1):
            e = np.zeros(m.n)
            e[i] = eps
            fp, fm = F(y + e), F(y - e)
            fwd, bwd = (fp - f0) / eps, (f0 - fm) / eps
            if abs(fwd - bwd) > 1e-4 * max(abs(fwd), abs(bwd), 1e-6):
                continue  # kink of F: no gradient to compare with
            fd = -(fp - fm) / (2 * eps)
            err = abs(cert.nu[i] - fd) / max(abs(fd), 1e-6)
            worst = max(worst, err)
            compared += 1
    record_property("detail", f"{compared} smooth coordinates, max relative error {worst:.1e} "
                    f"(limit 1e-3); degenerate certificates skipped {skipped}")
    assert compared >= 200 and worst <= 1e-3


CRIT6_RUNS = [(kind, n, seed) for n in (50, 100)
              for kind, seed in [("exp1", s) for s in range(5)] + [("sine", 0), ("clothoid", 0)]]


def test_criterion_6_sca_converges(record_property):
    worst_kkt, worst_rise, worst_time = 0.0, -math.inf, 0.0
    for kind, n, seed in CRIT6_RUNS:
        inst, rep, elapsed = run(kind, n, seed)
        trail = np.array(rep.trail[1:])
        worst_rise = max(worst_rise, float(np.max(np.diff(trail), initial=-math.inf)))
        worst_kkt = max(worst_kkt, rep.kkt)
        worst_time = max(worst_time, elapsed)
    record_property("detail", f"{len(CRIT6_RUNS)} runs: max trail increase {worst_rise:.1e} (limit 1e-12), "
                    f"max KKT {worst_kkt:.1e} (limit 1e-4), slowest {worst_time:.1f} s (limit 60 s)")
    assert worst_rise <= 1e-12 and worst_kkt <= 1e-4 and worst_time < 60.0


def test_criterion_7_clothoid_dips_below_cap(record_property):
    inst, rep, _ = run("clothoid", 100)
    u = inst.u
    low = u[1:-1].min()
    plateau = np.flatnonzero(np.isclose(u, low))
    first, last = plateau[0] + 1, plateau[-1] - 1  # interior of the plateau
    margin = min(u[first] - rep.w[first], u[last] - rep.w[last])
    free = solve(dataclasses.replace(inst, J=math.inf))
    need = 1e-3 * u.max()
    record_property("detail", f"plateau {plateau[0]}..{plateau[-1]}, margin {margin:.3f} (limit {need:.3f}); "
                    f"T = {rep.objective:.4f} s vs {free.objective:.4f} s without jerk limit")
    assert margin > need and free.objective < rep.objective


@pytest.mark.slow
def test_criterion_8_heuristic_and_lp_agree(record_property):
    worst, seeds, misses = 0.0, 100, []
    lp = SolverConfig(direction=Direction.LP)
    for seed in range(seeds):
        inst = gen_experiment1(seed, 100)
        a = run("exp1", 100, seed)[1].objective if ("exp1", 100, seed) in _runs else solve(inst).objective
        b = solve(inst, lp).objective
        gap = abs(a - b) / min(a, b)
        worst = max(worst, gap)
        if gap > 0.01:
            misses.append(seed)
    record_property("detail", f"{seeds} instances, max relative difference {worst:.1e} (limit 1e-2), "
                    f"seeds over the limit: {misses or 'none'}")
    assert worst <= 0.01


def test_criterion_9_nar_scaling(record_property):
    def median_time(n):
        times = []
        for seed in range(5):
            inst = gen_experiment1(seed, n)
            m = build(early_iterates(inst, 1), inst)
            solve_nar(m.uB, m.nar_coef, m.bN, m.nar_rows)  # warm up the compiled kernel
            for _ in range(5):
                t0 = time.perf_counter()
                solve_nar(m.uB, m.nar_coef, m.bN, m.nar_rows)
                times.append(time.perf_counter() - t0)
        return statistics.median(times)

    t1, t2 = median_time(250), median_time(500)
    record_property("detail", f"median {t1 * 1e3:.3f} ms at n=250, {t2 * 1e3:.3f} ms at n=500, "
                    f"ratio {t2 / t1:.2f} (limit 5)")
    assert t2 / t1 <= 5.0


def test_criterion_10_lp_matches_enumeration(record_property):
    rng = np.random.default_rng(1010)
    worst, most = 0.0, 0
    for _ in range(200):
        c, G, phi, lo, hi = random_direction_lp(rng, int(rng.integers(2, 9)))
        res = solve_lp(c, G, phi, lo, hi)
        _, ref = enumerate_lp(c, G, phi, lo, hi)
        worst = max(worst, abs(res.value - ref) / max(abs(ref), 1e-12))
        most = max(most, res.pivots)
    record_property("detail", f"max relative error {worst:.1e} (limit 1e-9), most pivots {most} (limit {MAX_PIVOTS})")
    assert worst <= 1e-9 and most < MAX_PIVOTS
