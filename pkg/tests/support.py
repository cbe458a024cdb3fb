"""Shared builders for the tests: random instances, feasible points, models."""

from __future__ import annotations

import math

import numpy as np

from jerkplan.instance import Instance
from jerkplan.linearize import Mode, build
from jerkplan.objective import jerk_terms


def random_instance(rng: np.random.Generator, n: int, J: float | None = None) -> Instance:
    """Blocky caps like the first experiment, with random limits."""
    u = np.zeros(n)
    cuts = np.sort(rng.choice(np.arange(2, n - 1), size=min(3, n - 3), replace=False))
    edges = [1, *cuts.tolist(), n - 1]
    for lo, hi in zip(edges[:-1], edges[1:]):
        u[lo:hi] = rng.uniform(5.0, 100.0)
    A = rng.uniform(0.5, 3.0)
    J = rng.uniform(0.2, 2.0) if J is None else J
    return Instance(rng.uniform(0.3, 1.0), u, A, J, "random")


def scaled_feasible(rng: np.random.Generator, inst: Instance, zeros: bool = False) -> np.ndarray:
    """A random profile below ``u``, shrunk until the tightest row is exactly active.

    Acceleration rows scale linearly and jerk rows like ``alpha**1.5``, so the
    largest feasible ``alpha`` has a closed form.
    """
    w = inst.u * rng.uniform(0.0, 1.0, inst.n)
    if zeros:
        w[rng.random(inst.n) < 0.2] = 0.0
    w[0] = w[-1] = 0.0
    alpha = 1.0
    step = np.max(np.abs(np.diff(w)))
    if step > 0:
        alpha = min(alpha, 2.0 * inst.h * inst.A / step)
    if not math.isinf(inst.J):
        jerk = np.max(np.abs(jerk_terms(w)))
        if jerk > 0:
            alpha = min(alpha, (2.0 * inst.h**2 * inst.J / jerk) ** (2.0 / 3.0))
    return alpha * w


def random_model(rng: np.random.Generator, n: int, mode: Mode = Mode.THETA_BETA):
    inst = random_instance(rng, n)
    w = scaled_feasible(rng, inst)
    return inst, w, build(w, inst, mode)


def random_monotone_data(rng: np.random.Generator, n: int):
    """Upper bounds and nonnegative rows of both families with zero endpoints."""
    y = rng.uniform(0.0, 10.0, n)
    y[0] = y[-1] = 0.0
    bA = rng.uniform(0.0, 3.0, n - 1)
    bD = rng.uniform(0.0, 3.0, n - 1)
    coef = rng.uniform(0.0, 0.5, n)
    bN = rng.uniform(0.0, 2.0, n)
    present = rng.random(n) < 0.8
    present[0] = present[-1] = False
    return y, bA, bD, coef, bN, present


def diag_dominant(rng: np.random.Generator, m: int):
    a = rng.uniform(-1.0, 1.0, m)
    c = rng.uniform(-1.0, 1.0, m)
    a[0] = c[-1] = 0.0
    b = (np.abs(a) + np.abs(c) + rng.uniform(0.1, 2.0, m)) * rng.choice([-1.0, 1.0], m)
    d = rng.uniform(-10.0, 10.0, m)
    return a, b, c, d


def dense_tridiag(a, b, c) -> np.ndarray:
    m = b.size
    T = np.diag(b)
    T[np.arange(1, m), np.arange(m - 1)] = a[1:]
    T[np.arange(m - 1), np.arange(1, m)] = c[:-1]
    return T


def random_direction_lp(rng: np.random.Generator, n: int):
    """A PAR-style direction problem: tridiagonal rows, ``phi >= 0``, box around 0."""
    idx = np.arange(1, n - 1)
    coef = rng.uniform(0.2, 0.9, idx.size)
    G = np.zeros((idx.size, n))
    G[np.arange(idx.size), idx] = -1.0
    G[np.arange(idx.size), idx - 1] = coef
    G[np.arange(idx.size), idx + 1] = coef
    phi = rng.uniform(0.0, 1.0, idx.size) * (rng.random(idx.size) < 0.7)
    sigma = rng.uniform(0.5, 3.0)
    lower = -sigma * rng.uniform(0.0, 1.0, n)
    upper = sigma * rng.uniform(0.2, 1.0, n)
    c = -rng.uniform(0.0, 2.0, n) * rng.choice([1.0, -0.3], n, p=[0.8, 0.2])
    return c, G, phi, lower, upper


def early_iterates(inst: Instance, count: int = 2):
    """The first ``count`` iterates of the outer loop, starting from zero speed."""
    from jerkplan.config import SolverConfig
    from jerkplan.sca import solve

    rep = solve(inst, SolverConfig(max_iter=count))
    return rep.w
