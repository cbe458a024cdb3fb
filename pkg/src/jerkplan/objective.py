"""Travel time, its gradient, feasibility checks and a KKT residual."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .instance import Instance

ACTIVE_TOL = 1e-7


def _profile(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("profile must be a 1-d array with at least two entries")
    if np.any(w < 0) or np.any(np.isnan(w)):
        raise ValueError("squared speeds must be nonnegative")
    return w


def eval_objective(w, h: float) -> float:
    """Travel time ``sum 2h / (sqrt(w[i+1]) + sqrt(w[i]))``.

    Returns ``math.inf`` when two neighbouring entries are both zero.
    """
    r = np.sqrt(_profile(w))
    den = r[1:] + r[:-1]
    if np.any(den == 0):
        return math.inf
    return float(np.sum(2.0 * h / den))


def gradient(w, h: float) -> np.ndarray:
    """Partial derivatives with respect to the interior entries.

    The two endpoint components are fixed by the boundary conditions and are
    reported as zero. Interior zeros have no finite derivative.
    """
    w = _profile(w)
    r = np.sqrt(w)
    ri = r[1:-1]
    if np.any(ri == 0):
        raise ValueError("gradient is unbounded at an interior zero")
    g = np.zeros_like(w)
    g[1:-1] = -h / (ri * (ri + r[2:]) ** 2) - h / (ri * (r[:-2] + ri) ** 2)
    return g


def jerk_terms(w) -> np.ndarray:
    """``(w[i-1] - 2w[i] + w[i+1]) * sqrt((w[i-1] + w[i+1]) / 2)`` per interior i."""
    w = np.asarray(w, dtype=float)
    x = np.maximum(w[:-2] + w[2:], 0.0)
    return (w[:-2] - 2.0 * w[1:-1] + w[2:]) * np.sqrt(0.5 * x)


@dataclass(frozen=True)
class FeasibilityReport:
    """Largest violation per constraint family; all entries are >= 0."""

    bounds: float
    acc: float
    jerk: float
    worst_family: str
    worst_index: int
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.bounds, self.acc, self.jerk)

    @property
    def feasible(self) -> bool:
        return self.max_violation <= self.tol


def violations(w, inst: Instance) -> dict[str, np.ndarray]:
    """Signed constraint values (positive means violated) per family."""
    w = np.asarray(w, dtype=float)
    bounds = np.maximum(w - inst.u, -w)
    bounds[0] = abs(w[0])
    bounds[-1] = abs(w[-1])
    step = np.diff(w)
    acc = np.abs(step) - 2.0 * inst.h * inst.A
    if math.isinf(inst.J):
        jerk = np.full(inst.n - 2, -math.inf)
    else:
        jerk = np.abs(jerk_terms(w)) - 2.0 * inst.h**2 * inst.J
    return {"bounds": bounds, "acc": acc, "jerk": jerk}


def check_feasibility(w, inst: Instance, tol: float = 1e-8) -> FeasibilityReport:
    w = np.asarray(w, dtype=float)
    if w.shape != (inst.n,):
        raise ValueError("profile length does not match the instance")
    v = violations(w, inst)
    # index offsets map each family's rows back to grid points
    offsets = {"bounds": 0, "acc": 0, "jerk": 1}
    worst = {k: max(0.0, float(a.max())) if a.size else 0.0 for k, a in v.items()}
    family = max(worst, key=worst.get)
    idx = int(np.argmax(v[family])) + offsets[family] if v[family].size else 0
    return FeasibilityReport(worst["bounds"], worst["acc"], worst["jerk"], family, idx, tol)


def _active_rows(w, inst: Instance):
    """Gradients (over interior entries) of constraints active at w."""
    n, h = inst.n, inst.h
    m = n - 2
    cols = []

    def row(entries):
        g = np.zeros(m)
        for j, val in entries:
            if 1 <= j <= n - 2:
                g[j - 1] += val
        return g

    def active(slack, rhs):
        return slack <= ACTIVE_TOL * (1.0 + abs(rhs))

    for i in range(1, n - 1):
        if active(inst.u[i] - w[i], inst.u[i]):
            cols.append(row([(i, 1.0)]))
        if active(w[i], 0.0):
            cols.append(row([(i, -1.0)]))
    lim = 2.0 * h * inst.A
    for i in range(n - 1):
        d = w[i + 1] - w[i]
        if active(lim - d, lim):
            cols.append(row([(i + 1, 1.0), (i, -1.0)]))
        if active(lim + d, lim):
            cols.append(row([(i, 1.0), (i + 1, -1.0)]))
    if not math.isinf(inst.J):
        lim = 2.0 * h * h * inst.J
        for i in range(1, n - 1):
            x = w[i - 1] + w[i + 1]
            if x <= 0:
                continue
            r = math.sqrt(0.5 * x)
            second = w[i - 1] - 2.0 * w[i] + w[i + 1]
            # derivative of second * sqrt(x / 2)
            side = r + second / (4.0 * r)
            grad = [(i - 1, side), (i, -2.0 * r), (i + 1, side)]
            if active(lim - second * r, lim):
                cols.append(row(grad))
            if active(lim + second * r, lim):
                cols.append(row([(j, -g) for j, g in grad]))
    return cols


def kkt_residual(w, inst: Instance) -> float:
    """Infinity norm of the least-squares stationarity residual.

    Multipliers are restricted to be nonnegative and supported on constraints
    that are active within ``ACTIVE_TOL * (1 + |rhs|)``. Returns ``inf`` when
    the objective is unbounded at w.
    """
    w = np.asarray(w, dtype=float)
    if eval_objective(w, inst.h) == math.inf or np.any(w[1:-1] <= 0):
        return math.inf
    g = gradient(w, inst.h)[1:-1]
    cols = _active_rows(w, inst)
    if not cols:
        return float(np.max(np.abs(g)))
    C = np.column_stack(cols)
    lam, _ = nnls(C, -g, maxiter=50 * C.shape[1])
    return float(np.max(np.abs(g + C @ lam)))
