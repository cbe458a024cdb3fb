"""Component-wise maximum under a box and the NAR jerk rows.

A NAR row ``i`` reads ``x[i] <= c[i] * (x[i-1] + x[i+1]) + bN[i]`` with
``c[i] >= 0``. Between two anchors ``s < t`` (indices where ``x`` equals its
upper bound ``y``) the solution either has every row active, which is a
tridiagonal system, or splits at the next anchor. The solver looks for the
largest candidate anchor ``j`` whose tridiagonal solution stays strictly
below ``y`` and admits a nonnegative certificate ``A^T lam = 1``, accepts
that piece and continues from ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .tridiag import PIVOT_TOL, PivotBreakdown, solve as thomas_solve

EQ_TOL = 1e-12
CERT_TOL = 1e-9


@njit(cache=True)
def _hits_bound(val, ub, lower):
    return val >= ub - EQ_TOL * (1.0 + abs(ub)) or val < lower - EQ_TOL * (1.0 + abs(lower))


@njit(cache=True)
def _segment(x, coef, bN, s, t, lower, skip, bp, dp, dq, psi, xb, g):
    while t - s >= 2:
        m = t - s - 1
        # forward elimination shared by every candidate j; A and A^T have
        # the same pivots, only their right-hand sides differ
        good = m
        for k in range(m):
            r = s + 1 + k
            if k == 0:
                piv = 1.0
                rhs = bN[r] + coef[r] * x[s]
                rhs_t = 1.0
            else:
                piv = 1.0 - coef[r] * coef[r - 1] / bp[k - 1]
                rhs = bN[r] + coef[r] * dp[k - 1] / bp[k - 1]
                rhs_t = 1.0 + coef[r - 1] * dq[k - 1] / bp[k - 1]
            if abs(piv) <= PIVOT_TOL:
                good = k
                break
            bp[k] = piv
            dp[k] = rhs
            dq[k] = rhs_t
            psi[k] = -coef[r] / piv

        j = min(t, s + 1 + good)
        while j > s + 1:
            kend = j - s - 2
            val = (dp[kend] + coef[j - 1] * x[j]) / bp[kend]
            bad = -1
            k = kend
            while True:
                xb[k] = val
                if _hits_bound(val, x[s + 1 + k], lower):
                    bad = k
                    break
                if k == 0:
                    break
                k -= 1
                val = dp[k] / bp[k] - psi[k] * val
            if bad >= 0:
                jj = j - 1
                if skip and bad < kend:
                    # back substitution is affine in the value seeded at the
                    # anchor, so x_bad for a smaller anchor is predicted exactly
                    g[bad] = 1.0
                    for q in range(bad + 1, kend + 1):
                        g[q] = g[q - 1] * (-psi[q - 1])
                    while jj > s + 1 + bad:
                        q = jj - s - 1
                        pred = xb[bad] + g[q] * (x[jj] - xb[q])
                        if not _hits_bound(pred, x[s + 1 + bad], lower):
                            break
                        jj -= 1
                j = jj
                continue
            lam = dq[kend] / bp[kend]
            ok = lam >= -CERT_TOL
            k = kend - 1
            while ok and k >= 0:
                lam = (dq[k] + coef[s + 2 + k] * lam) / bp[k]
                ok = lam >= -CERT_TOL
                k -= 1
            if not ok:
                j -= 1
                continue
            for k in range(kend + 1):
                x[s + 1 + k] = xb[k]
            break
        s = j


@njit(cache=True)
def nar_kernel(y, coef, bN, present, lower, skip, out):
    n = y.shape[0]
    for i in range(n):
        out[i] = y[i]
    bp = np.empty(n)
    dp = np.empty(n)
    dq = np.empty(n)
    psi = np.empty(n)
    xb = np.empty(n)
    g = np.empty(n)
    s = 0
    for i in range(1, n):
        if i == n - 1 or not present[i]:
            if i - s >= 2:
                _segment(out, coef, bN, s, i, lower, skip, bp, dp, dq, psi, xb, g)
            s = i


def prune_bound(y, coef, present) -> float:
    """A value every component of the maximum is known to exceed.

    With all coefficients at most 1/2 and nonnegative right-hand sides, the
    constant vector ``min(0, min y)`` is feasible, so the maximum dominates it.
    Otherwise no bound is used.
    """
    if present.any() and coef[present].max() > 0.5:
        return -np.inf
    return min(0.0, float(np.min(y)))


def solve_nar(y, coef, bN, present=None, skip: bool = True) -> np.ndarray:
    """Largest ``x <= y`` satisfying the NAR rows flagged in ``present``.

    Rows absent from ``present`` (and the two endpoints) act as anchors where
    ``x`` equals ``y``. ``skip`` enables the multi-step reduction of the
    candidate anchor; results are identical either way.
    """
    y = np.ascontiguousarray(y, dtype=float)
    n = y.size
    coef = np.ascontiguousarray(coef, dtype=float)
    bN = np.ascontiguousarray(bN, dtype=float)
    if present is None:
        present = np.ones(n, dtype=bool)
    present = np.array(present, dtype=bool)
    present[0] = present[-1] = False
    if coef.shape != (n,) or bN.shape != (n,):
        raise ValueError("coef and bN need n entries")
    if np.any(coef[present] < 0) or np.any(bN[present] < 0):
        raise ValueError("NAR rows need nonnegative coefficients and right-hand sides")
    out = np.empty(n)
    nar_kernel(y, coef, bN, present, prune_bound(y, coef, present), skip, out)
    return out


# Step-by-step pieces, mainly for inspection and testing ---------------------


@dataclass(frozen=True)
class NarSegment:
    """Rows ``s+1 .. j-1`` all active, with ``x[s] = y[s]`` and ``x[j] = y[j]``.

    ``A`` has unit diagonal and ``-coef`` off the diagonal; ``q`` folds the
    anchor values into its first and last entries.
    """

    s: int
    j: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    q: np.ndarray

    def dense(self) -> np.ndarray:
        m = self.b.size
        A = np.diag(self.b)
        A[np.arange(1, m), np.arange(m - 1)] = self.a[1:]
        A[np.arange(m - 1), np.arange(1, m)] = self.c[:-1]
        return A


def nar_segment(y, coef, bN, s: int, j: int) -> NarSegment:
    if j - s < 2:
        raise ValueError("segment needs at least one row")
    rows = np.arange(s + 1, j)
    c = np.asarray(coef, float)[rows]
    q = np.asarray(bN, float)[rows].copy()
    q[0] += c[0] * y[s]
    q[-1] += c[-1] * y[j]
    a = -c.copy()
    a[0] = 0.0
    sup = -c.copy()
    sup[-1] = 0.0
    return NarSegment(s, j, a, np.ones(rows.size), sup, q)


def solve_segment(seg: NarSegment) -> np.ndarray:
    return thomas_solve(seg.a, seg.b, seg.c, seg.q)


def feasibility_scan(xbar, y, lower: float = 0.0) -> bool:
    """True when every entry lies in ``[lower, y)``; False means reduce j."""
    xbar = np.asarray(xbar, float)
    y = np.asarray(y, float)
    return bool(np.all(xbar >= lower) and np.all(xbar < y))


def optimality_certificate(seg: NarSegment):
    """Solve ``A^T lam = 1``; return ``lam`` if it is nonnegative, else None."""
    # transposing swaps the roles of the sub- and super-diagonal
    a_t = np.concatenate(([0.0], seg.c[:-1]))
    c_t = np.concatenate((seg.a[1:], [0.0]))
    try:
        lam = thomas_solve(a_t, seg.b, c_t, np.ones(seg.b.size))
    except PivotBreakdown:
        return None
    return lam if np.all(lam >= -CERT_TOL) else None
