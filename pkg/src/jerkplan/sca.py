"""Outer loop: linearize, find a step, move, repeat."""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import Direction, SolverConfig
from .descent import compute_update
from .instance import Instance
from .linearize import Mode, build
from .objective import check_feasibility, eval_objective, jerk_terms, kkt_residual

__all__ = ["Direction", "Mode", "SolveReport", "SolverConfig", "Termination", "line_search", "solve"]

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8
LINE_SEARCH_TOL = 1e-10
KKT_EVERY_ITER_MAX_N = 400


class Termination(str, enum.Enum):
    STEP = "step"
    KKT = "kkt"
    BUDGET = "budget"
    DEGENERATE = "degenerate"
    STALL = "stall"


@dataclass
class SolveReport:
    w: np.ndarray
    objective: float
    reason: Termination
    iterations: int
    trail: list[float] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    step_norms: list[float] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    kkt: float = math.inf
    max_violation: float = 0.0
    restricted_steps: int = 0
    violated_42: int = 0
    heuristic_failures: int = 0
    lp_solves: int = 0
    exact_solves: int = 0
    backtracks: int = 0

    @property
    def certified(self) -> bool:
        return self.reason in (Termination.STEP, Termination.KKT)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "objective": None if math.isinf(self.objective) else self.objective,
            "reason": self.reason.value,
            "iterations": self.iterations,
            "kkt_residual": None if math.isinf(self.kkt) else self.kkt,
            "max_violation": self.max_violation,
            "trail": [None if math.isinf(t) else t for t in self.trail],
            "alphas": self.alphas,
            "step_norms": self.step_norms,
            "times": self.times,
            "restricted_steps": self.restricted_steps,
            "violated_42": self.violated_42,
            "heuristic_failures": self.heuristic_failures,
            "lp_solves": self.lp_solves,
            "exact_solves": self.exact_solves,
            "backtracks": self.backtracks,
        }


def line_search(w, dw, inst: Instance, tol: float = LINE_SEARCH_TOL, halvings: int = 30) -> float:
    """Largest ``2**-k`` (k <= halvings) keeping ``w + alpha dw`` feasible; 0 if none."""
    w = np.asarray(w, float)
    dw = np.asarray(dw, float)
    alpha = 1.0
    for _ in range(halvings + 1):
        if check_feasibility(_clean(w + alpha * dw, inst), inst, tol).feasible:
            return alpha
        alpha *= 0.5
    return 0.0


def null_start_scale(dw, inst: Instance) -> float:
    """Largest factor keeping ``alpha * dw`` feasible, starting from zero speed.

    Bounds and acceleration rows are linear in ``alpha`` and already hold at
    one; the jerk terms scale like ``alpha**1.5``.
    """
    if math.isinf(inst.J):
        return 1.0
    jerk = np.abs(jerk_terms(dw))
    lim = 2.0 * inst.h**2 * inst.J
    big = jerk > lim
    if not big.any():
        return 1.0
    return float(np.min((lim / jerk[big]) ** (2.0 / 3.0))) * (1.0 - 1e-9)


def _clean(w, inst: Instance) -> np.ndarray:
    w = np.clip(w, 0.0, inst.u)
    w[0] = w[-1] = 0.0
    return w


def solve(inst: Instance, cfg: SolverConfig | None = None) -> SolveReport:
    cfg = SolverConfig() if cfg is None else cfg
    n = inst.n
    w = np.zeros(n)
    if not np.any(inst.u > 0):
        return SolveReport(w, math.inf, Termination.DEGENERATE, 0, [math.inf])
    stop = cfg.stop_tol * inst.scale
    report = SolveReport(w, math.inf, Termination.BUDGET, 0, [math.inf])
    sigma0 = 1.0
    for k in range(cfg.max_iter):
        t0 = time.perf_counter()
        model = build(w, inst, cfg.mode)
        first_only = cfg.inexact_below is not None and k < cfg.inexact_below
        upd = compute_update(w, model, cfg, sigma0, first_only)
        dw = upd.dw
        report.restricted_steps += int(upd.restricted)
        report.violated_42 += int(upd.violated_42.size > 0)
        report.heuristic_failures += upd.stats.get("heuristic_failures", 0)
        report.lp_solves += upd.stats.get("lp_solves", 0)
        report.exact_solves += upd.stats.get("exact_solves", 0)
        norm = float(np.max(np.abs(dw)))

        if not np.any(w[1:-1] > 0):
            alpha = null_start_scale(dw, inst)
            if not check_feasibility(_clean(alpha * dw, inst), inst, FEAS_TOL).feasible:
                alpha = line_search(w, dw, inst)
        else:
            alpha = 1.0
            trial = _clean(w + dw, inst)
            if cfg.mode is Mode.ETA or not check_feasibility(trial, inst, FEAS_TOL).feasible:
                if cfg.mode is Mode.THETA_BETA:
                    report.backtracks += 1
                    log.warning("full step infeasible at iteration %d; backtracking", k)
                alpha = line_search(w, dw, inst)
        if alpha == 0.0 and norm > 0:
            report.reason = Termination.STALL
            report.times.append(time.perf_counter() - t0)
            break

        w_new = _clean(w + alpha * dw, inst)
        f_new = eval_objective(w_new, inst.h)
        if f_new > report.trail[-1]:
            # only roundoff can get here; keep the better point
            log.debug("objective rose by %.3e at iteration %d", f_new - report.trail[-1], k)
        moved = float(np.max(np.abs(w_new - w)))
        sigma0 = max(moved, cfg.sigma_floor)
        w = w_new
        report.trail.append(f_new)
        report.alphas.append(alpha)
        report.step_norms.append(norm)
        report.iterations = k + 1

        if norm <= stop:
            report.reason = Termination.STEP
            report.times.append(time.perf_counter() - t0)
            break
        if n <= KKT_EVERY_ITER_MAX_N or norm <= 1e-3 * inst.scale:
            if kkt_residual(w, inst) <= cfg.kkt_target:
                report.reason = Termination.KKT
                report.times.append(time.perf_counter() - t0)
                break
        report.times.append(time.perf_counter() - t0)

    report.w = w
    report.objective = eval_objective(w, inst.h)
    report.kkt = kkt_residual(w, inst)
    report.max_violation = check_feasibility(w, inst, FEAS_TOL).max_violation
    return report
