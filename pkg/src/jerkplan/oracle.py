"""Slow, independent reference computations used to validate the solvers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class MonotoneRows:
    """Rows ``x[j] <= a * x[j-1] + b * x[j+1] + c`` with ``a, b, c >= 0``."""

    j: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"monotone rows need {name} >= 0")

    @staticmethod
    def empty() -> "MonotoneRows":
        z = np.zeros(0)
        return MonotoneRows(np.zeros(0, dtype=np.int64), z, z, z)

    def __add__(self, other: "MonotoneRows") -> "MonotoneRows":
        return MonotoneRows(*(np.concatenate((getattr(self, f), getattr(other, f)))
                              for f in ("j", "a", "b", "c")))


def acc_rows(bA, bD) -> MonotoneRows:
    bA = np.asarray(bA, float)
    bD = np.asarray(bD, float)
    m = bA.size
    idx = np.arange(m)
    ones, zeros = np.ones(m), np.zeros(m)
    fwd = MonotoneRows(idx + 1, ones, zeros, bA)
    bwd = MonotoneRows(idx, zeros, ones, bD)
    return fwd + bwd


def nar_rows(coef, bN, present) -> MonotoneRows:
    idx = np.flatnonzero(present)
    c = np.asarray(coef, float)[idx]
    return MonotoneRows(idx, c, c, np.asarray(bN, float)[idx])


@njit(cache=True)
def _sweep(z, j, a, b, c, order):
    n = z.shape[0]
    change = 0.0
    m = j.shape[0]
    for p in range(m):
        r = p if order > 0 else m - 1 - p
        i = j[r]
        left = z[i - 1] if i > 0 else 0.0
        right = z[i + 1] if i < n - 1 else 0.0
        cand = a[r] * left + b[r] * right + c[r]
        if cand < z[i]:
            change = max(change, z[i] - cand)
            z[i] = cand
    return change


def fixpoint_max(y, rows: MonotoneRows, order: str = "symmetric", max_sweeps: int | None = None):
    """Component-wise maximum of ``{x <= y} ∩ rows`` by repeated tightening.

    Each sweep lowers ``z[j]`` to the right-hand side of any violated row.
    Iteration stops once a sweep changes nothing beyond roundoff. Raises
    RuntimeError if ``max_sweeps`` (default ``max(n**2, 1000)``) is exhausted.
    """
    z = np.array(y, dtype=float)
    n = z.size
    if rows.j.size == 0:
        return z
    j = np.asarray(rows.j, dtype=np.int64)
    a, b, c = (np.ascontiguousarray(v, dtype=float) for v in (rows.a, rows.b, rows.c))
    limit = max(n * n, 1000) if max_sweeps is None else max_sweeps
    scale = max(1.0, float(np.max(np.abs(z))))
    for sweep in range(limit):
        if order == "forward":
            step = _sweep(z, j, a, b, c, 1)
        elif order == "backward":
            step = _sweep(z, j, a, b, c, -1)
        else:
            step = max(_sweep(z, j, a, b, c, 1), _sweep(z, j, a, b, c, -1))
        if step <= 1e-15 * scale:
            return z
    raise RuntimeError("tightening did not settle; check the sign conditions")


def enumerate_lp(c, G, phi, lower, upper, tol: float = 1e-9):
    """Minimise ``c @ d`` over ``G d <= phi``, ``lower <= d <= upper`` by brute force.

    Every vertex is the solution of ``n`` tight constraints: some set of
    rows, as many free variables, and each remaining variable at one of its
    bounds. All such combinations are solved and the best feasible one kept.
    Returns ``(d, value)``.
    """
    c = np.asarray(c, float)
    G = np.atleast_2d(np.asarray(G, float))
    phi = np.asarray(phi, float)
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    n = c.size
    if n > 8:
        raise ValueError("enumeration is limited to n <= 8")
    m = G.shape[0] if G.size else 0
    best_val, best_d = np.inf, None

    def consider(D):
        nonlocal best_val, best_d
        ok = np.all(D >= lower[:, None] - tol, axis=0) & np.all(D <= upper[:, None] + tol, axis=0)
        if m:
            ok &= np.all(G @ D <= phi[:, None] + tol * (1 + np.abs(phi[:, None])), axis=0)
        if not ok.any():
            return
        vals = c @ D[:, ok]
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_d = float(vals[k]), D[:, ok][:, k].copy()

    for k in range(0, min(m, n) + 1):
        fixed_count = n - k
        patterns = np.array(list(itertools.product((0, 1), repeat=fixed_count)), dtype=bool)
        patterns = patterns.reshape(-1, fixed_count).T  # fixed_count x 2**fixed_count
        for S in itertools.combinations(range(m), k):
            S = list(S)
            for F in itertools.combinations(range(n), k):
                F = list(F)
                NF = [i for i in range(n) if i not in F]
                vals = np.where(patterns, upper[NF][:, None], lower[NF][:, None])
                D = np.empty((n, vals.shape[1]))
                D[NF] = vals
                if k:
                    M = G[np.ix_(S, F)]
                    if abs(np.linalg.det(M)) < 1e-12:
                        continue
                    rhs = phi[S][:, None] - G[np.ix_(S, NF)] @ vals
                    D[F] = np.linalg.solve(M, rhs)
                consider(D)
    return best_d, best_val


def finite_diff_F(F, y, eps: float = 1e-5, indices=None) -> np.ndarray:
    """Central differences ``(F(y + eps e_i) - F(y - eps e_i)) / (2 eps)``.

    ``F`` maps an upper-bound vector to a scalar. Coordinates not listed in
    ``indices`` are left at zero.
    """
    y = np.asarray(y, float)
    out = np.zeros_like(y)
    idx = range(1, y.size - 1) if indices is None else indices
    for i in idx:
        e = np.zeros_like(y)
        e[i] = eps
        out[i] = (F(y + e) - F(y - e)) / (2.0 * eps)
    return out
