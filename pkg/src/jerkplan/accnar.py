"""Joint box + acceleration + NAR maximum, and multipliers of the box rows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import nnls

from .acc import acc_kernel
from .linearize import LinearizedModel
from .nar import nar_kernel, prune_bound
from .objective import ACTIVE_TOL, eval_objective, gradient
from .tridiag import PivotBreakdown, solve as thomas_solve

MAX_ROUNDS = 10_000


@njit(cache=True)
def accnar_kernel(y, bA, bD, coef, bN, present, lower, eps, max_rounds, skip, out):
    n = y.shape[0]
    xa = np.empty(n)
    acc_kernel(y, bA, bD, xa)
    nar_kernel(xa, coef, bN, present, lower, skip, out)
    rounds = 1
    while rounds < max_rounds:
        gap = 0.0
        for i in range(n):
            gap = max(gap, xa[i] - out[i])
        if gap <= eps:
            break
        acc_kernel(out, bA, bD, xa)
        nar_kernel(xa, coef, bN, present, lower, skip, out)
        rounds += 1
    return rounds


@dataclass(frozen=True)
class AccNarResult:
    dw: np.ndarray
    value: float
    rounds: int


def solve_accnar_raw(y, bA, bD, coef, bN, present, eps: float = 1e-8):
    """Alternate the two subsolvers until their outputs agree within ``eps``.

    Returns ``(x, rounds)``. Each output is an upper bound on the joint
    maximum, so the sequence decreases monotonically towards it.
    """
    y = np.ascontiguousarray(y, dtype=float)
    present = np.array(present, dtype=bool)
    present[0] = present[-1] = False
    coef = np.ascontiguousarray(coef, dtype=float)
    out = np.empty_like(y)
    rounds = accnar_kernel(
        y, np.ascontiguousarray(bA, float), np.ascontiguousarray(bD, float), coef,
        np.ascontiguousarray(bN, float), present, prune_bound(y, coef, present),
        eps, MAX_ROUNDS, True, out,
    )
    return out, int(rounds)


def solve_accnar(y, model: LinearizedModel, eps: float = 1e-8) -> AccNarResult:
    """Largest step below ``y`` that satisfies the acceleration and NAR rows.

    ``value`` is the travel time at ``model.w + dw``; it is infinite when the
    step leaves the nonnegative orthant.
    """
    dw, rounds = solve_accnar_raw(y, model.bA, model.bD, model.nar_coef, model.bN,
                                  model.nar_rows, eps)
    p = model.w + dw
    if np.any(p < 0):
        # tiny negatives are roundoff around a zero speed
        if np.min(p) < -1e-12 * max(1.0, float(np.max(np.abs(model.w)))):
            return AccNarResult(dw, np.inf, rounds)
        p = np.maximum(p, 0.0)
    return AccNarResult(dw, eval_objective(p, model.h), rounds)


@dataclass(frozen=True)
class DualCertificate:
    """Multipliers of ``dw <= y`` (``nu``) and of the model rows.

    ``method`` records how they were obtained: ``"tridiagonal"`` (one active
    row per index, solved exactly), ``"nnls"``, ``"bounds"`` (the fallback
    ``max(0, -grad)`` on active bounds) or ``"surrogate"`` (no finite gradient).
    """

    nu: np.ndarray
    lam_acc: np.ndarray
    lam_dec: np.ndarray
    lam_nar: np.ndarray
    residual: float
    method: str

    @property
    def degenerate(self) -> bool:
        return self.method in ("bounds", "surrogate")


def _active(slack, rhs):
    return slack <= ACTIVE_TOL * (1.0 + np.abs(rhs))


def extract_multipliers(dw, y, model: LinearizedModel, w=None) -> DualCertificate:
    w = model.w if w is None else np.asarray(w, float)
    dw = np.asarray(dw, float)
    y = np.asarray(y, float)
    n = dw.size
    m = n - 2
    zeros = np.zeros(n - 1)
    bound = _active(y - dw, y)
    bound[0] = bound[-1] = False
    p = np.maximum(w + dw, 0.0)
    if m == 0:
        return DualCertificate(np.zeros(n), zeros, zeros, np.zeros(n), 0.0, "tridiagonal")
    if np.any(p[1:-1] <= 0) or eval_objective(p, model.h) == np.inf:
        nu = bound.astype(float)
        return DualCertificate(nu, zeros, zeros, np.zeros(n), np.inf, "surrogate")

    g = gradient(p, model.h)
    _, acc, dec, nar = active_sets(dw, y, model)
    c = model.nar_coef
    cert = _tridiagonal_multipliers(g, bound, acc, dec, nar, c)
    if cert is None:
        cert = _nnls_multipliers(g, bound, acc, dec, nar, c)
    return cert


def active_sets(dw, y, model: LinearizedModel):
    """Masks of active box, acceleration, deceleration and NAR rows at ``dw``."""
    n = dw.size
    bound = _active(y - dw, y)
    bound[0] = bound[-1] = False
    step = dw[1:] - dw[:-1]
    acc = _active(model.bA - step, model.bA)
    dec = _active(model.bD + step, model.bD)
    c = model.nar_coef
    nar = np.zeros(n, dtype=bool)
    rows = model.nar_rows
    slack = model.bN[1:-1] - (dw[1:-1] - c[1:-1] * (dw[:-2] + dw[2:]))
    nar[1:-1] = rows[1:-1] & _active(slack, model.bN[1:-1])
    return bound, acc, dec, nar


def _tridiagonal_multipliers(g, bound, acc, dec, nar, c):
    """One active row per interior index, preferring the bound, then the
    acceleration row into i, the deceleration row out of i, then NAR."""
    n = g.size
    left = np.zeros(n)   # coefficient of x[i-1] in the row owned by i
    right = np.zeros(n)  # coefficient of x[i+1]
    kind = np.zeros(n, dtype=np.int8)
    for i in range(1, n - 1):
        if bound[i]:
            kind[i] = 1
        elif acc[i - 1]:
            kind[i], left[i] = 2, -1.0
        elif dec[i]:
            kind[i], right[i] = 3, -1.0
        elif nar[i]:
            kind[i], left[i], right[i] = 4, -c[i], -c[i]
        else:
            return None
    # column i of K holds row i's gradient; solve K mu = -g on the interior
    sub = np.concatenate(([0.0], right[1:-2]))
    sup = np.concatenate((left[2:-1], [0.0]))
    try:
        mu = thomas_solve(sub, np.ones(n - 2), sup, -g[1:-1])
    except PivotBreakdown:
        return None
    gscale = max(1.0, float(np.max(np.abs(g))))
    if np.any(mu < -1e-9 * gscale):
        return None
    mu = np.maximum(mu, 0.0)
    nu = np.zeros(n)
    lam_acc, lam_dec, lam_nar = np.zeros(n - 1), np.zeros(n - 1), np.zeros(n)
    k = kind[1:-1]
    idx = np.arange(1, n - 1)
    nu[idx[k == 1]] = mu[k == 1]
    lam_acc[idx[k == 2] - 1] = mu[k == 2]
    lam_dec[idx[k == 3]] = mu[k == 3]
    lam_nar[idx[k == 4]] = mu[k == 4]
    res = _stationarity(g, nu, lam_acc, lam_dec, lam_nar, c)
    if res > 1e-6 * gscale:
        return None
    return DualCertificate(nu, lam_acc, lam_dec, lam_nar, res, "tridiagonal")


def _stationarity(g, nu, lam_acc, lam_dec, lam_nar, c):
    r = g + nu
    # acc row i: x[i+1] - x[i]; dec row i: x[i] - x[i+1]
    r[1:] += lam_acc - lam_dec
    r[:-1] += lam_dec - lam_acc
    r += lam_nar
    r[:-1] -= (c * lam_nar)[1:]
    r[1:] -= (c * lam_nar)[:-1]
    return float(np.max(np.abs(r[1:-1])))


def _nnls_multipliers(g, bound, acc, dec, nar, c):
    n = g.size
    cols, tags = [], []
    for i in np.flatnonzero(bound):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(e)
        tags.append(("nu", i))
    for i in np.flatnonzero(acc):
        e = np.zeros(n)
        e[i + 1], e[i] = 1.0, -1.0
        cols.append(e)
        tags.append(("acc", i))
    for i in np.flatnonzero(dec):
        e = np.zeros(n)
        e[i], e[i + 1] = 1.0, -1.0
        cols.append(e)
        tags.append(("dec", i))
    for i in np.flatnonzero(nar):
        e = np.zeros(n)
        e[i], e[i - 1], e[i + 1] = 1.0, -c[i], -c[i]
        cols.append(e)
        tags.append(("nar", i))
    nu = np.zeros(n)
    lam = {"nu": nu, "acc": np.zeros(n - 1), "dec": np.zeros(n - 1), "nar": np.zeros(n)}
    gscale = max(1.0, float(np.max(np.abs(g))))
    if cols:
        C = np.column_stack(cols)[1:-1]
        mu, _ = nnls(C, -g[1:-1], maxiter=50 * C.shape[1])
        for (name, i), val in zip(tags, mu):
            lam[name][i] = val
        res = _stationarity(g, nu, lam["acc"], lam["dec"], lam["nar"], c)
        if res <= 1e-6 * gscale:
            return DualCertificate(nu, lam["acc"], lam["dec"], lam["nar"], res, "nnls")
    else:
        res = float(np.max(np.abs(g[1:-1])))
    fallback = np.where(bound, np.maximum(0.0, -g), 0.0)
    z = np.zeros(n - 1)
    return DualCertificate(fallback, z, z.copy(), np.zeros(n), res, "bounds")
