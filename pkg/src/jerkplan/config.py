"""Solver settings shared by the descent loop and the outer iteration."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .linearize import Mode


class Direction(str, enum.Enum):
    HEURISTIC = "heuristic"
    LP = "lp"


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the outer loop and of the trust-region descent.

    ``stop_tol`` is relative: iteration stops once the update is at most
    ``stop_tol * max(1, max u)`` in the infinity norm. ``inexact_below``,
    when set, ends the trust-region loop after its first accepted step for
    outer iterations with index below that value.
    """

    mode: Mode = Mode.THETA_BETA
    direction: Direction = Direction.HEURISTIC
    eps: float = 1e-8
    eps1: float = 1e-6
    rho: float = 4.0
    tau: float = 0.25
    max_iter: int = 500
    stop_tol: float = 1e-7
    kkt_target: float = 1e-4
    sigma_floor: float = 1e-9
    max_tr_steps: int = 500
    inexact_below: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not (self.eps > 0 and self.eps1 > 0):
            raise ValueError("eps and eps1 must be positive")
        if not (0 < self.tau < 1 < self.rho):
            raise ValueError("need 0 < tau < 1 < rho")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
