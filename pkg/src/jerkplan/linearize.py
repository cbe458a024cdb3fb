"""Coefficients of the convex direction-finding problem around an iterate.

All arrays have length ``n``; row ``i`` of a jerk family lives at index ``i``
and entries at the endpoints (and at masked rows) are zero. The acceleration
arrays ``bA``/``bD`` have length ``n - 1`` and pair grid points ``i, i+1``.

Row forms in the step variable ``d``:

* acceleration: ``d[i+1] - d[i] <= bA[i]`` and ``d[i] - d[i+1] <= bD[i]``
* NAR: ``d[i] - nar_coef[i] * (d[i-1] + d[i+1]) <= bN[i]``
* PAR: ``par_coef[i] * (d[i-1] + d[i+1]) - d[i] <= bP[i]``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .instance import Instance

ZERO_SUM_TOL = 1e-12


class Mode(str, enum.Enum):
    ETA = "eta"
    THETA_BETA = "theta_beta"


class InfeasiblePoint(ValueError):
    """The iterate violates an original constraint beyond the tolerance."""

    def __init__(self, family: str, index: int, value: float):
        super().__init__(f"{family} row {index} has negative right-hand side {value:.3e}")
        self.family = family
        self.index = index
        self.value = value


@dataclass(frozen=True)
class RawCoefficients:
    """Unclipped coefficients, exactly as the closed forms give them."""

    bA: np.ndarray
    bD: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    bP: np.ndarray
    bN: np.ndarray
    active_mask: np.ndarray


def raw_coefficients(w, inst: Instance) -> RawCoefficients:
    w = np.asarray(w, dtype=float)
    n, h = inst.n, inst.h
    if w.shape != (n,):
        raise ValueError("profile length does not match the instance")
    bA = 2.0 * h * inst.A - w[1:] + w[:-1]
    bD = 2.0 * h * inst.A - w[:-1] + w[1:]

    eta, theta, beta, bP, bN = (np.zeros(n) for _ in range(5))
    mask = np.zeros(n, dtype=bool)
    if not math.isinf(inst.J):
        x = w[:-2] + w[2:]
        live = x > ZERO_SUM_TOL * inst.scale
        mask[1:-1] = live
        xl = x[live]
        wi = w[1:-1][live]
        c = math.sqrt(2.0) * h * h * inst.J
        rx = np.sqrt(xl)
        spread = c * xl ** -1.5 / 2.0
        idx = np.flatnonzero(mask)
        eta[idx] = (3.0 * xl - 2.0 * wi) / (4.0 * xl)
        theta[idx] = 0.5 + spread
        beta[idx] = 0.5 - spread
        second = xl - 2.0 * wi
        bP[idx] = (2.0 * c - second * rx) / (2.0 * rx)
        bN[idx] = (2.0 * c + second * rx) / (2.0 * rx)
    return RawCoefficients(bA, bD, eta, theta, beta, bP, bN, mask)


@dataclass(frozen=True)
class LinearizedModel:
    w: np.ndarray
    h: float
    lB: np.ndarray
    uB: np.ndarray
    bA: np.ndarray
    bD: np.ndarray
    mode: Mode
    nar_coef: np.ndarray
    par_coef: np.ndarray
    bP: np.ndarray
    bN: np.ndarray
    active_mask: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    beta: np.ndarray

    @property
    def n(self) -> int:
        return self.w.size

    @property
    def nar_rows(self) -> np.ndarray:
        """Rows whose NAR coefficient keeps the monotone structure."""
        return self.active_mask & (self.nar_coef >= 0)

    @property
    def flipped_rows(self) -> np.ndarray:
        """Rows with a negative NAR coefficient.

        Written as ``d[i] + |c| (d[i-1] + d[i+1]) <= bN[i]`` they are monotone
        in the other direction, so they are imposed on the upper-bound vector
        rather than inside the component-wise maximum.
        """
        return self.active_mask & (self.nar_coef < 0)

    @property
    def par_rows(self) -> np.ndarray:
        return self.active_mask

    def with_upper(self, uB: np.ndarray) -> "LinearizedModel":
        return LinearizedModel(**{**self.__dict__, "uB": np.asarray(uB, float)})


def build(w, inst: Instance, mode: Mode = Mode.THETA_BETA, tol: float = 1e-8) -> LinearizedModel:
    """Linearize around ``w``.

    Right-hand sides within ``tol * max(1, max u)`` below zero are rounded up
    to zero; anything more negative means ``w`` is infeasible and raises
    :class:`InfeasiblePoint`.
    """
    mode = Mode(mode)
    w = np.asarray(w, dtype=float)
    raw = raw_coefficients(w, inst)
    lim = tol * inst.scale
    arrays = {"bA": raw.bA, "bD": raw.bD, "bP": raw.bP, "bN": raw.bN}
    for name, arr in arrays.items():
        if arr.size and arr.min() < -lim:
            i = int(np.argmin(arr))
            raise InfeasiblePoint(name, i, float(arr[i]))
    ub = inst.u - w
    if ub.min() < -lim or w.min() < -lim:
        i = int(np.argmin(np.minimum(ub, w)))
        raise InfeasiblePoint("bounds", i, float(min(ub[i], w[i])))
    clip = {k: np.maximum(v, 0.0) for k, v in arrays.items()}
    if mode is Mode.THETA_BETA:
        nar_coef, par_coef = raw.beta, raw.theta
    else:
        nar_coef, par_coef = raw.eta, raw.eta
    lB = -w
    uB = np.maximum(ub, lB)
    lB[0] = lB[-1] = uB[0] = uB[-1] = 0.0
    return LinearizedModel(
        w=w.copy(), h=inst.h, lB=lB, uB=uB, bA=clip["bA"], bD=clip["bD"], mode=mode,
        nar_coef=nar_coef, par_coef=par_coef, bP=clip["bP"], bN=clip["bN"],
        active_mask=raw.active_mask, eta=raw.eta, theta=raw.theta, beta=raw.beta,
    )
