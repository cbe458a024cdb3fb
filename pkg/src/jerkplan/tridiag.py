"""Thomas algorithm for tridiagonal systems, with a reusable factorization.

A system of size ``m`` is stored as three diagonals ``a`` (sub), ``b`` (main)
and ``c`` (super) of length ``m``; ``a[0]`` and ``c[m-1]`` are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

PIVOT_TOL = 1e-14


class PivotBreakdown(ArithmeticError):
    """Raised when an elimination pivot falls below the breakdown threshold."""

    def __init__(self, index: int, pivot: float):
        super().__init__(f"pivot {pivot:.3e} at row {index} is below {PIVOT_TOL:g}")
        self.index = index
        self.pivot = pivot


@njit(cache=True)
def _factor_kernel(a, b, c, delta, bp, psi):
    """Forward elimination of the matrix only. Returns the failing row or -1."""
    m = b.shape[0]
    bp[0] = b[0]
    delta[0] = 0.0
    if abs(bp[0]) <= PIVOT_TOL:
        return 0
    psi[0] = c[0] / bp[0] if m > 1 else 0.0
    for i in range(1, m):
        delta[i] = a[i] / bp[i - 1]
        bp[i] = b[i] - delta[i] * c[i - 1]
        if abs(bp[i]) <= PIVOT_TOL:
            return i
        psi[i] = c[i] / bp[i] if i < m - 1 else 0.0
    return -1


@njit(cache=True)
def _back_kernel(delta, bp, psi, d, x):
    m = bp.shape[0]
    dp = d[0]
    alpha = np.empty(m)
    alpha[0] = dp / bp[0]
    for i in range(1, m):
        dp = d[i] - delta[i] * dp
        alpha[i] = dp / bp[i]
    x[m - 1] = alpha[m - 1]
    for i in range(m - 2, -1, -1):
        x[i] = alpha[i] - psi[i] * x[i + 1]


@dataclass(frozen=True)
class TriFactor:
    """Forward-elimination data of a tridiagonal matrix.

    ``pivots`` are the modified diagonal entries, ``delta`` the elimination
    multipliers and ``psi[i] = c[i] / pivots[i]`` the back-substitution
    coefficients, so that ``x[i] = alpha[i] - psi[i] * x[i+1]``.
    """

    delta: np.ndarray
    pivots: np.ndarray
    psi: np.ndarray

    @property
    def size(self) -> int:
        return self.pivots.shape[0]

    def gain(self, i: int, r: int) -> float:
        """Sensitivity of ``x[i]`` to the value placed at position ``r >= i``.

        Back substitution is affine in the value seeded at ``r``, with slope
        ``prod(-psi[i:r])``. Replacing that value by ``v`` therefore moves
        ``x[i]`` by ``gain(i, r) * (v - x[r])``.
        """
        if r < i:
            raise ValueError("r must not precede i")
        return float(np.prod(-self.psi[i:r]))


def _as_diagonals(a, b, c):
    b = np.ascontiguousarray(b, dtype=float)
    m = b.shape[0]
    a = np.ascontiguousarray(a, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    if m == 0 or a.shape != (m,) or c.shape != (m,):
        raise ValueError("diagonals must be nonempty 1-d arrays of equal length")
    return a, b, c


def factor(a, b, c) -> TriFactor:
    a, b, c = _as_diagonals(a, b, c)
    m = b.shape[0]
    delta, bp, psi = np.zeros(m), np.zeros(m), np.zeros(m)
    bad = _factor_kernel(a, b, c, delta, bp, psi)
    if bad >= 0:
        raise PivotBreakdown(int(bad), float(bp[bad]))
    return TriFactor(delta, bp, psi)


def back_solve(fac: TriFactor, d) -> np.ndarray:
    d = np.ascontiguousarray(d, dtype=float)
    if d.shape != (fac.size,):
        raise ValueError("right-hand side has the wrong length")
    x = np.empty(fac.size)
    _back_kernel(fac.delta, fac.pivots, fac.psi, d, x)
    return x


def solve(a, b, c, d) -> np.ndarray:
    """Solve the tridiagonal system; raises :class:`PivotBreakdown` on failure."""
    return back_solve(factor(a, b, c), d)
