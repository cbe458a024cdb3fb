"""Trust-region descent on the optimal-value function F over upper bounds y.

``F(y)`` is the travel time of the best step below ``y`` that respects the
acceleration and NAR rows. It is convex and nonincreasing in ``y``, and the
box multipliers ``nu`` give ``-nu`` as a subgradient. PAR rows are imposed on
``y`` directly; a trust-region loop moves ``y`` by directions that maximise
``nu @ d`` inside those rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .accnar import accnar_kernel, active_sets, extract_multipliers, solve_accnar
from .config import Direction, SolverConfig
from .linearize import LinearizedModel
from .objective import gradient
from .lp import LPError, TriRows, solve_lp, solve_lp_rows

log = logging.getLogger(__name__)

TERNARY_ITERS = 60
ROW_TOL = 1e-12
EXACT_MAX_N = 200  # dense exact-model fallback is used up to this size
REACH = 2.0  # bound on the response of the step, in trust-region radii


@dataclass
class TrustRegionState:
    y: np.ndarray
    F: float
    sigma: float
    t: int = 0


def eval_F(y, model: LinearizedModel, eps: float = 1e-8):
    """``(value, dw, certificate)`` for the upper-bound vector ``y``."""
    res = solve_accnar(y, model, eps)
    return res.value, res.dw, extract_multipliers(res.dw, y, model)


# One-sided prices -----------------------------------------------------------

FREE = 1e4  # stands in for "no bound"; local responses are O(1)


@dataclass(frozen=True)
class Prices:
    """Exact rates of change of F when a single ``y[i]`` is raised or cut.

    ``rise[i]`` is the decrease of F per unit increase of ``y[i]``, ``fall[i]``
    the increase of F per unit decrease. Convexity gives ``rise <= fall``.
    """

    rise: np.ndarray
    fall: np.ndarray

    def gain(self, d) -> float:
        return float(self.rise @ np.maximum(d, 0.0) - self.fall @ np.maximum(-d, 0.0))


@njit(cache=True)
def _price_kernel(g, base, bA, bD, coef, bN, present, rise, fall):
    n = g.shape[0]
    y = base.copy()
    out = np.empty(n)
    for i in range(1, n - 1):
        if base[i] != 0.0:
            continue
        for sign in (1.0, -1.0):
            y[i] = sign
            accnar_kernel(y, bA, bD, coef, bN, present, -FREE, 1e-13, 10_000, True, out)
            s = 0.0
            for j in range(n):
                s += g[j] * min(out[j], FREE)
            if sign > 0:
                rise[i] = max(-s, 0.0)
            else:
                fall[i] = max(s, 0.0)
        y[i] = 0.0


def one_sided_prices(dw, y, model: LinearizedModel, cert) -> Prices:
    """Directional derivatives of F along each coordinate at ``y``.

    Moving ``y[i]`` shifts the optimal step through every active row, which
    the box multipliers alone do not see when several constraints are active
    at the same index. The shift solves the same componentwise maximum with
    the active rows made homogeneous and the inactive ones dropped.
    """
    n = dw.size
    p = model.w + dw
    if cert.method == "surrogate":
        return Prices(cert.nu.copy(), cert.nu.copy())
    bound, acc, dec, nar = active_sets(dw, y, model)
    g = gradient(np.maximum(p, 0.0), model.h)
    base = np.where(bound, 0.0, FREE)
    base[0] = base[-1] = 0.0
    rise = np.zeros(n)
    fall = np.zeros(n)
    _price_kernel(g, base, np.where(acc, 0.0, FREE), np.where(dec, 0.0, FREE),
                  np.ascontiguousarray(model.nar_coef, float), np.where(nar, 0.0, FREE),
                  nar, rise, fall)
    return Prices(rise, fall)


# Direction problem ----------------------------------------------------------


def par_rhs(y, model: LinearizedModel) -> np.ndarray:
    """Slack of each PAR row at ``y``; the step ``d`` must keep it nonnegative."""
    c = model.par_coef
    phi = np.zeros_like(y)
    side = y[:-2] + y[2:]
    phi[1:-1] = model.bP[1:-1] - c[1:-1] * side + y[1:-1]
    return np.where(model.par_rows, np.maximum(phi, 0.0), 0.0)


def direction_rows(y, model: LinearizedModel) -> TriRows:
    """PAR rows, plus NAR rows with negative coefficient, restated for ``d``."""
    par = np.flatnonzero(model.par_rows)
    c = model.par_coef[par]
    rows = TriRows(par, c, -np.ones(par.size), c, par_rhs(y, model)[par])
    flip = np.flatnonzero(model.flipped_rows)
    if flip.size:
        a = -model.nar_coef[flip]
        here = y[flip] + a * (y[flip - 1] + y[flip + 1])
        rhs = np.maximum(model.bN[flip] - here, 0.0)
        rows = rows + TriRows(flip, a, np.ones(flip.size), a, rhs)
    return rows


@njit(cache=True)
def _propagate(d, coef, phi, present, p, alpha, delta, z):
    n = d.shape[0]
    for i in range(n):
        z[i] = d[i]
    # left of p: keep row j+1 active until the propagated value reaches d
    prev2 = d[p]
    prev = d[p - 1] - alpha * delta
    if prev < d[p - 1]:
        z[p - 1] = prev
        j = p - 2
        while j >= 0 and present[j + 1] and coef[j + 1] > 0:
            val = (phi[j + 1] + prev) / coef[j + 1] - prev2
            if val >= d[j]:
                break
            z[j] = val
            prev2, prev = prev, val
            j -= 1
    prev2 = d[p]
    prev = d[p + 1] - (1.0 - alpha) * delta
    if prev < d[p + 1]:
        z[p + 1] = prev
        j = p + 2
        while j < n and present[j - 1] and coef[j - 1] > 0:
            val = (phi[j - 1] + prev) / coef[j - 1] - prev2
            if val >= d[j]:
                break
            z[j] = val
            prev2, prev = prev, val
            j += 1


@njit(cache=True)
def _score(z, up, down, lbar):
    """Model change of F along ``z``: raises are priced by ``up``, cuts by ``down``."""
    for i in range(z.shape[0]):
        if z[i] < lbar[i] - 1e-12 * (1.0 + abs(lbar[i])):
            return np.inf
    s = 0.0
    for i in range(z.shape[0]):
        if z[i] > 0:
            s -= up[i] * z[i]
        else:
            s -= down[i] * z[i]
    return s


@njit(cache=True)
def _violations(d, coef, phi, present, out):
    n = d.shape[0]
    for i in range(n):
        out[i] = -np.inf
    for i in range(1, n - 1):
        if present[i]:
            out[i] = coef[i] * (d[i - 1] + d[i + 1]) - d[i] - phi[i]


@njit(cache=True)
def heuristic_kernel(up, down, coef, phi, present, lbar, ubar, d):
    """Returns True on success with the direction written into ``d``."""
    n = up.shape[0]
    for i in range(n):
        d[i] = ubar[i]
    dropped = np.zeros(n, dtype=np.bool_)
    viol = np.empty(n)
    z = np.empty(n)
    best_z = np.empty(n)
    for _ in range(4 * n + 10):
        _violations(d, coef, phi, present, viol)
        p = -1
        worst = 0.0
        for i in range(1, n - 1):
            tol = ROW_TOL * (1.0 + abs(phi[i]))
            if not dropped[i] and viol[i] > tol and viol[i] > worst:
                worst = viol[i]
                p = i
        if p < 0:
            break
        if coef[p] <= 0:
            dropped[p] = True
            continue
        delta = viol[p] / coef[p]
        # coarse scan, then ternary refinement around the best sample
        best = np.inf
        best_a = 0.0
        for k in range(11):
            a = 0.1 * k
            _propagate(d, coef, phi, present, p, a, delta, z)
            val = _score(z, up, down, lbar)
            if val < best:
                best, best_a = val, a
                best_z[:] = z
        if best == np.inf:
            dropped[p] = True
            continue
        lo = max(0.0, best_a - 0.1)
        hi = min(1.0, best_a + 0.1)
        for _ in range(TERNARY_ITERS):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            _propagate(d, coef, phi, present, p, m1, delta, z)
            f1 = _score(z, up, down, lbar)
            if f1 < best:
                best = f1
                best_z[:] = z
            _propagate(d, coef, phi, present, p, m2, delta, z)
            f2 = _score(z, up, down, lbar)
            if f2 < best:
                best = f2
                best_z[:] = z
            if f1 <= f2:
                hi = m2
            else:
                lo = m1
        d[:] = best_z
    _violations(d, coef, phi, present, viol)
    for i in range(1, n - 1):
        if viol[i] > ROW_TOL * (1.0 + abs(phi[i])):
            return False
    return _score(d, up, down, lbar) < 0.0


def heuristic_direction(nu, coef, phi, lbar, ubar, present=None, nu_up=None):
    """Repair the box corner ``ubar`` row by row until no PAR row is violated.

    The objective is ``-nu @ d``, or with ``nu_up`` the one-sided version
    that prices positive entries of ``d`` by ``nu_up``. Returns the direction,
    or None when a violated row cannot be repaired inside the box or the
    result is not a descent direction for the model.
    """
    nu = np.ascontiguousarray(nu, float)
    up = nu if nu_up is None else np.ascontiguousarray(nu_up, float)
    n = nu.size
    present = np.ones(n, dtype=bool) if present is None else np.asarray(present, bool)
    d = np.empty(n)
    ok = heuristic_kernel(up, nu, np.ascontiguousarray(coef, float), np.ascontiguousarray(phi, float),
                          present, np.ascontiguousarray(lbar, float),
                          np.ascontiguousarray(ubar, float), d)
    return d if ok else None


def _direction(y, model, prices, lbar, ubar, cfg, stats):
    rows = direction_rows(y, model)
    if cfg.direction is Direction.HEURISTIC:
        phi = par_rhs(y, model)
        d = heuristic_direction(prices.fall, model.par_coef, phi, lbar, ubar, model.par_rows,
                                prices.rise)
        if d is not None and np.all(rows.values(d) <= rows.rhs + ROW_TOL * (1.0 + np.abs(rows.rhs))):
            return d
        stats["heuristic_failures"] += 1
    try:
        res = solve_lp_rows(-prices.rise, rows, lbar, ubar, prices.fall)
    except LPError as exc:
        log.warning("direction LP failed: %s", exc)
        return None
    stats["lp_solves"] += 1
    return res.d


def exact_direction(y, dw, model: LinearizedModel, lbar, ubar):
    """Direction maximising the first-order decrease of F, slacks included.

    Alongside ``d`` the problem carries ``r``, the change of the optimal
    step: ``r <= d + (y - dw)`` and every model row holds at ``dw + r``.
    Minimising ``grad @ r`` gives the change of F along ``d`` up to the
    curvature of the travel time, which the per-coordinate prices only bound
    when several constraints meet at one index. Returns ``(d, gain)`` or
    None when the gradient is not finite.
    """
    p = model.w + dw
    n = dw.size
    if np.any(p[1:-1] <= 0):
        return None
    g = gradient(np.maximum(p, 0.0), model.h)[1:-1]
    m = n - 2
    rows = direction_rows(y, model)
    Gd = rows.dense(n)[:, 1:-1]
    width = float(np.max(np.maximum(ubar, -lbar)))
    live = rows.rhs <= np.abs(Gd).sum(axis=1) * width
    Gd = Gd[live]
    eye = np.eye(m)
    step = np.diff(dw)
    c = model.nar_coef
    nar = np.flatnonzero(model.nar_rows[1:-1])
    R = np.zeros((nar.size, n))
    R[np.arange(nar.size), nar + 1] = 1.0
    R[np.arange(nar.size), nar] = -c[nar + 1]
    R[np.arange(nar.size), nar + 2] = -c[nar + 1]
    D = np.zeros((n - 1, n))
    D[np.arange(n - 1), np.arange(1, n)] = 1.0
    D[np.arange(n - 1), np.arange(n - 1)] = -1.0
    resp = np.vstack((D, -D, R))[:, 1:-1]
    slack = np.concatenate((
        model.bA - step,
        model.bD + step,
        model.bN[nar + 1] - (dw[nar + 1] - c[nar + 1] * (dw[nar] + dw[nar + 2])),
    ))
    box_slack = (y - dw)[1:-1]
    # r stays within a few radii; rows that cannot bind inside that are dropped
    reach = REACH * max(float(np.max(ubar - lbar)), 1e-300)
    near = slack <= np.abs(resp).sum(axis=1) * reach
    close = box_slack <= reach + float(np.max(ubar - lbar))
    G = np.vstack((
        np.hstack((Gd, np.zeros((Gd.shape[0], m)))),
        np.hstack((-eye[close], eye[close])),
        np.hstack((np.zeros((int(near.sum()), m)), resp[near])),
    ))
    rhs = np.concatenate((rows.rhs[live], box_slack[close], slack[near]))
    cost = np.concatenate((np.zeros(m), g))
    lower = np.concatenate((lbar[1:-1], np.full(m, -reach)))
    upper = np.concatenate((ubar[1:-1], np.full(m, reach)))
    try:
        res = solve_lp(cost, G, np.maximum(rhs, 0.0), lower, upper)
    except LPError as exc:
        log.warning("exact direction LP failed: %s", exc)
        return None
    d = np.zeros(n)
    d[1:-1] = res.d[:m]
    return d, -res.value


# Update -----------------------------------------------------------------


@dataclass
class UpdateResult:
    dw: np.ndarray
    y: np.ndarray
    value: float
    steps: int
    accepted: int
    stats: dict = field(default_factory=dict)
    restricted: bool = False
    violated_42: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def assumption_42(dw, w) -> np.ndarray:
    """Indices j where ``dw[j-1] + dw[j+1] > 2 (w[j-1] + w[j+1])``."""
    lhs = dw[:-2] + dw[2:]
    rhs = 2.0 * (w[:-2] + w[2:])
    return np.flatnonzero(lhs > rhs + 1e-12 * (1.0 + rhs)) + 1


def par_violation(dw, model: LinearizedModel) -> np.ndarray:
    v = np.full(dw.size, -np.inf)
    c = model.par_coef
    v[1:-1] = c[1:-1] * (dw[:-2] + dw[2:]) - dw[1:-1] - model.bP[1:-1]
    return np.where(model.par_rows, v, -np.inf)


def _trust_region(model, cfg, sigma0, first_only):
    stats = {"heuristic_failures": 0, "lp_solves": 0, "exact_solves": 0}
    n = model.n
    y = np.zeros(n)
    res = solve_accnar(y, model, cfg.eps)
    if not model.par_rows.any() and not model.flipped_rows.any():
        top = solve_accnar(model.uB, model, cfg.eps)
        return UpdateResult(top.dw, model.uB.copy(), top.value, 0, 1, stats)
    state = TrustRegionState(y, res.value, max(sigma0, cfg.sigma_floor))
    # radii are relative to the opening one, which tracks the last outer move
    floor = cfg.eps1 * min(1.0, state.sigma)
    dw = res.dw
    prices = one_sided_prices(dw, y, model, extract_multipliers(dw, y, model))
    accepted = 0
    # once the per-coordinate model runs dry, switch to the exact one
    exact = False
    can_exact = n <= EXACT_MAX_N
    opening = state.sigma
    while state.t < cfg.max_tr_steps:
        state.t += 1
        lbar = np.maximum(model.lB - state.y, -state.sigma)
        ubar = np.minimum(model.uB - state.y, state.sigma)
        lbar = np.minimum(lbar, 0.0)
        ubar = np.maximum(ubar, 0.0)
        if exact:
            found = exact_direction(state.y, dw, model, lbar, ubar)
            stats["exact_solves"] += 1
            d, gain = found if found is not None else (None, 0.0)
        else:
            d = _direction(state.y, model, prices, lbar, ubar, cfg, stats)
            gain = prices.gain(d) if d is not None else 0.0
        if d is None or not gain > 0:
            if exact or not can_exact:
                break
            exact, state.sigma = True, opening
            continue
        trial = state.y + d
        new = solve_accnar(trial, model, cfg.eps)
        if new.value < state.F:
            state.y, state.F, dw = trial, new.value, new.dw
            prices = one_sided_prices(dw, trial, model, extract_multipliers(dw, trial, model))
            state.sigma *= cfg.rho
            accepted += 1
            # the cheap model gets another chance after each exact success
            exact, opening = False, state.sigma
            if first_only:
                break
        else:
            state.sigma *= cfg.tau
            if state.sigma < floor:
                if exact or not can_exact:
                    break
                exact, state.sigma = True, opening
    return UpdateResult(dw, state.y, state.F, state.t, accepted, stats)


def compute_update(w, model: LinearizedModel, cfg: SolverConfig, sigma0: float = 1.0,
                   first_only: bool = False) -> UpdateResult:
    """One direction-finding step: the best feasible displacement from ``w``.

    When the returned step violates a PAR row and the step-size assumption
    behind that guarantee fails, the search is repeated with the upper
    bounds next to each offending index capped.
    """
    w = np.asarray(w, float)
    out = _trust_region(model, cfg, sigma0, first_only)
    bad42 = assumption_42(out.dw, w)
    out.violated_42 = bad42
    if bad42.size:
        log.debug("step-size assumption fails at %d rows", bad42.size)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(model.uB))))
    if np.any(par_violation(out.dw, model) > tol) and bad42.size:
        capped = restriction_caps(w, model.uB, bad42)
        again = _trust_region(model.with_upper(capped), cfg, sigma0, first_only)
        again.violated_42 = bad42
        again.restricted = True
        return again
    return out


def restriction_caps(w, uB, indices) -> np.ndarray:
    """Upper bounds with ``d[j-1], d[j+1] <= w[j-1|j+1] + (w[j-1] + w[j+1]) / 2``."""
    capped = np.array(uB, float)
    for j in indices:
        half = 0.5 * (w[j - 1] + w[j + 1])
        for k in (j - 1, j + 1):
            if 0 < k < w.size - 1:
                capped[k] = min(capped[k], w[k] + half)
    return capped
