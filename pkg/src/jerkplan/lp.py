"""Dense bounded-variable primal simplex for small direction problems.

Solves ``min c @ d`` subject to ``G d <= phi`` and ``lower <= d <= upper``
where ``lower <= 0 <= upper`` and ``phi >= 0``, so ``d = 0`` is feasible and
the slack basis is a valid start. Each ``d`` is split into ``d+ - d-`` with
both parts starting at their lower bound of zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

DEGENERATE_TOL = 1e-10
PIVOT_TOL = 1e-9
COST_TOL = 1e-12
MAX_PIVOTS = 10_000
BLAND_AFTER = 25  # consecutive degenerate pivots before switching rules
BLAND_PIVOT_SHARE = 1e-2
HARRIS_TOL = 1e-12


class LPError(RuntimeError):
    pass


@njit(cache=True)
def _ratio(xB, col, ub, basis, i, slack):
    if col[i] > PIVOT_TOL:
        return max((xB[i] + slack) / col[i], 0.0)
    if col[i] < -PIVOT_TOL:
        return max((ub[basis[i]] - xB[i] + slack) / (-col[i]), 0.0)
    return np.inf


@njit(cache=True)
def _simplex(T, red, xB, basis, ub, at_upper, max_pivots):
    """Pivot in place until no improving column is left.

    Returns ``(status, pivots, bland)`` with status 0 on optimality, 1 at the
    pivot limit and 2 for an unbounded ray.
    """
    m, N = T.shape
    is_basic = np.zeros(N, dtype=np.bool_)
    for k in range(m):
        is_basic[basis[k]] = True
    col = np.empty(m)
    support = np.empty(N, dtype=np.int64)
    pivots = 0
    degenerate_run = 0
    bland = False
    while True:
        j = -1
        best_red = 0.0
        for k in range(N):
            if is_basic[k]:
                continue
            r = red[k]
            if (not at_upper[k] and r < -COST_TOL) or (at_upper[k] and r > COST_TOL):
                if bland:
                    j = k
                    break
                if abs(r) > best_red:
                    best_red = abs(r)
                    j = k
        if j < 0:
            return 0, pivots, bland
        if pivots >= max_pivots:
            return 1, pivots, bland
        direction = -1.0 if at_upper[j] else 1.0
        for i in range(m):
            col[i] = direction * T[i, j]

        # Harris ratio test: relax feasibility slightly, then take the
        # largest pivot (lowest basic index under Bland) within that bound
        step = ub[j]
        relaxed = np.inf
        for i in range(m):
            relaxed = min(relaxed, _ratio(xB, col, ub, basis, i, HARRIS_TOL))
        leave = -1
        if relaxed < step:
            big = 0.0
            for i in range(m):
                if _ratio(xB, col, ub, basis, i, 0.0) <= relaxed:
                    big = max(big, abs(col[i]))
            score = -np.inf
            for i in range(m):
                if _ratio(xB, col, ub, basis, i, 0.0) <= relaxed and abs(col[i]) >= BLAND_PIVOT_SHARE * big:
                    sc = -float(basis[i]) if bland else abs(col[i])
                    if sc > score:
                        score = sc
                        leave = i
            step = _ratio(xB, col, ub, basis, leave, 0.0)
        if not np.isfinite(step):
            return 2, pivots, bland

        for i in range(m):
            xB[i] -= step * col[i]
        pivots += 1
        if step <= DEGENERATE_TOL:
            degenerate_run += 1
            if degenerate_run >= BLAND_AFTER:
                bland = True
        else:
            degenerate_run = 0
        if leave < 0:
            at_upper[j] = not at_upper[j]
            continue

        out = basis[leave]
        at_upper[out] = col[leave] < 0
        start = ub[j] if at_upper[j] else 0.0
        at_upper[j] = False
        piv = T[leave, j]
        nz = 0
        for k in range(N):
            if T[leave, k] != 0.0:
                T[leave, k] /= piv
                support[nz] = k
                nz += 1
        for i in range(m):
            if i == leave:
                continue
            f = T[i, j]
            if f != 0.0:
                for q in range(nz):
                    k = support[q]
                    T[i, k] -= f * T[leave, k]
        f = red[j]
        for q in range(nz):
            k = support[q]
            red[k] -= f * T[leave, k]
        xB[leave] = start + direction * step
        basis[leave] = j
        is_basic[out] = False
        is_basic[j] = True


@dataclass(frozen=True)
class TriRows:
    """Rows ``left * d[i-1] + mid * d[i] + right * d[i+1] <= rhs`` at ``index``."""

    index: np.ndarray
    left: np.ndarray
    mid: np.ndarray
    right: np.ndarray
    rhs: np.ndarray

    def dense(self, n: int) -> np.ndarray:
        G = np.zeros((self.index.size, n))
        r = np.arange(self.index.size)
        G[r, self.index] = self.mid
        inner = self.index > 0
        G[r[inner], self.index[inner] - 1] = self.left[inner]
        inner = self.index < n - 1
        G[r[inner], self.index[inner] + 1] = self.right[inner]
        return G

    def values(self, d) -> np.ndarray:
        d = np.asarray(d, float)
        dl = np.concatenate(([0.0], d[:-1]))[self.index]
        dr = np.concatenate((d[1:], [0.0]))[self.index]
        return self.left * dl + self.mid * d[self.index] + self.right * dr

    def __add__(self, other: "TriRows") -> "TriRows":
        return TriRows(*(np.concatenate((getattr(self, f), getattr(other, f)))
                         for f in ("index", "left", "mid", "right", "rhs")))


@dataclass(frozen=True)
class LPResult:
    d: np.ndarray
    value: float
    pivots: int
    bland: bool


def solve_lp(c, G, phi, lower, upper, c_neg=None) -> LPResult:
    """Optimal vertex of the direction problem.

    ``c_neg``, if given, replaces ``-c`` as the cost of the negative part of
    each variable, making the objective ``c @ max(d, 0) + c_neg @ max(-d, 0)``.
    This stays convex as long as ``c + c_neg >= 0``.
    """
    c = np.asarray(c, float)
    c_neg = -c if c_neg is None else np.asarray(c_neg, float)
    n = c.size
    G = np.asarray(G, float).reshape(-1, n)
    phi = np.maximum(np.asarray(phi, float), 0.0)
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    if np.any(lower > 0) or np.any(upper < 0):
        raise ValueError("box must contain the origin")
    m = G.shape[0]

    # columns: d+ parts, d- parts, slacks; drop parts fixed at zero
    keep_pos = np.flatnonzero(upper > 0)
    keep_neg = np.flatnonzero(lower < 0)
    A = np.hstack((G[:, keep_pos], -G[:, keep_neg], np.eye(m)))
    cost = np.concatenate((c[keep_pos], c_neg[keep_neg], np.zeros(m)))
    ub = np.concatenate((upper[keep_pos], -lower[keep_neg], np.full(m, np.inf)))
    N = A.shape[1]
    slack0 = N - m

    T = np.ascontiguousarray(A)
    basis = np.arange(slack0, N)
    xB = phi.copy()
    at_upper = np.zeros(N, dtype=np.bool_)
    red = cost.copy()  # reduced costs; slack basis has zero cost
    status, pivots, bland = _simplex(T, red, xB, basis, ub, at_upper, MAX_PIVOTS)
    if status == 1:
        raise LPError("pivot limit reached")
    if status == 2:
        raise LPError("unbounded direction problem")

    x = np.where(at_upper, ub, 0.0)
    x[basis] = xB
    d = np.zeros(n)
    d[keep_pos] += x[:keep_pos.size]
    d[keep_neg] -= x[keep_pos.size:slack0]
    d = np.clip(d, lower, upper)
    value = float(c @ np.maximum(d, 0.0) + c_neg @ np.maximum(-d, 0.0))
    return LPResult(d, value, pivots, bland)


def solve_lp_rows(c, rows: TriRows, lower, upper, c_neg=None) -> LPResult:
    return solve_lp(c, rows.dense(np.asarray(c).size), rows.rhs, lower, upper, c_neg)
