"""Component-wise maximum under a box and acceleration/deceleration rows."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def acc_kernel(y, bA, bD, out):
    n = y.shape[0]
    out[0] = y[0]
    for i in range(n - 1):
        out[i + 1] = min(out[i] + bA[i], y[i + 1])
    for i in range(n - 2, -1, -1):
        out[i] = min(out[i], out[i + 1] + bD[i])


def solve_acc(y, bA, bD) -> np.ndarray:
    """Largest ``x <= y`` with ``x[i+1] - x[i] <= bA[i]`` and ``x[i] - x[i+1] <= bD[i]``.

    One forward sweep enforces the acceleration rows, one backward sweep the
    deceleration rows; the backward sweep never raises a forward value.
    """
    y = np.ascontiguousarray(y, dtype=float)
    bA = np.ascontiguousarray(bA, dtype=float)
    bD = np.ascontiguousarray(bD, dtype=float)
    if bA.shape != (y.size - 1,) or bD.shape != (y.size - 1,):
        raise ValueError("bA and bD need n - 1 entries")
    if np.any(bA < 0) or np.any(bD < 0):
        raise ValueError("acceleration right-hand sides must be nonnegative")
    out = np.empty_like(y)
    acc_kernel(y, bA, bD, out)
    return out
