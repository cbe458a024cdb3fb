"""Problem instances on a uniform arc-length grid.

The decision variable is ``w[i] = v(s_i)**2``. An instance holds the grid
step ``h``, the squared-speed caps ``u`` (zero at both endpoints) and the
acceleration and jerk limits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

MASK64 = (1 << 64) - 1


class SplitMix64:
    """Small 64-bit generator, chosen so that instances can be reproduced in
    any language from the seed alone."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randbelow(self, k: int) -> int:
        """Integer in [0, k) by multiply-shift on 53 random bits."""
        if k <= 0:
            raise ValueError("k must be positive")
        return int(self.uniform() * k)

    def sample(self, population: list, k: int) -> list:
        """k distinct items, via a partial Fisher-Yates shuffle."""
        pool = list(population)
        if k > len(pool):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


@dataclass
class PathSpec:
    """Curvature samples along a path of length ``s_f``."""

    s_f: float
    curvature: np.ndarray
    v_max: float
    A_N: float

    def __post_init__(self):
        self.curvature = np.asarray(self.curvature, dtype=float)
        if self.curvature.ndim != 1 or self.curvature.size < 3:
            raise ValueError("curvature needs at least three samples")
        if not np.all(np.isfinite(self.curvature)):
            raise ValueError("curvature must be finite")
        if not self.s_f > 0 or not self.v_max > 0 or not self.A_N > 0:
            raise ValueError("s_f, v_max and A_N must be positive")

    @property
    def n(self) -> int:
        return self.curvature.size


@dataclass
class Instance:
    """Grid of ``n`` points with spacing ``h``.

    ``J`` may be ``math.inf`` to drop the jerk rows entirely.
    """

    h: float
    u: np.ndarray
    A: float
    J: float
    name: str = ""
    path: PathSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != 1 or self.u.size < 3:
            raise ValueError("need at least three grid points")
        if not (self.h > 0 and self.A > 0 and self.J > 0):
            raise ValueError("h, A and J must be positive")
        if np.any(self.u < 0) or not np.all(np.isfinite(self.u)):
            raise ValueError("caps must be finite and nonnegative")
        if self.u[0] != 0 or self.u[-1] != 0:
            raise ValueError("caps must vanish at both endpoints")

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def s_f(self) -> float:
        return self.h * (self.n - 1)

    @property
    def scale(self) -> float:
        return max(1.0, float(self.u.max()))

    @property
    def s(self) -> np.ndarray:
        return np.linspace(0.0, self.s_f, self.n)


def build_upper_bound(path: PathSpec) -> np.ndarray:
    """``u_i = min(v_max**2, A_N / |k_i|)`` with endpoints forced to zero."""
    k = np.abs(path.curvature)
    u = np.full(path.n, path.v_max**2)
    curved = k > 0
    with np.errstate(over="ignore"):  # tiny |k| overflows to inf, which min absorbs
        u[curved] = np.minimum(u[curved], path.A_N / k[curved])
    u[0] = u[-1] = 0.0
    return u


def instance_from_path(path: PathSpec, A: float, J: float, name: str = "") -> Instance:
    return Instance(path.s_f / (path.n - 1), build_upper_bound(path), A, J, name, path)


# Generators ---------------------------------------------------------------

EXP1_S_F, EXP1_A, EXP1_J, EXP1_CAP = 60.0, 2.78, 0.5, 100.0


def gen_experiment1(seed: int, n: int) -> Instance:
    """Seven constant blocks of random caps over the interior points."""
    if n < 9:
        raise ValueError("need n >= 9 for seven nonempty blocks")
    rng = SplitMix64(seed)
    # a cut at position c separates interior points c and c+1
    cuts = sorted(rng.sample(list(range(1, n - 2)), 6))
    edges = [1] + [c + 1 for c in cuts] + [n - 1]
    u = np.zeros(n)
    for lo, hi in zip(edges[:-1], edges[1:]):
        u[lo:hi] = EXP1_CAP * (1.0 - rng.uniform())  # in (0, 100]
    return Instance(EXP1_S_F / (n - 1), u, EXP1_A, EXP1_J, f"exp1-{seed}-{n}")


EXP2_S_F, EXP2_A, EXP2_J = 1000.0, 0.25, 0.025
EXP2_A_N, EXP2_VMAX2 = 4.9, 192.93
EXP2_K_MAX = 0.1


def experiment2_knots(seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Knots of a continuous piecewise-linear curvature with up to five pieces.

    Each piece is straight (k = 0), a constant arc, or a linear ramp to a random
    target with magnitude in ``[EXP2_K_MAX / 4, EXP2_K_MAX]``. The first piece
    is always a ramp. A straight piece that follows a curved one ramps down to
    zero so the curvature stays continuous.
    """
    rng = SplitMix64(seed)
    m = 1 + rng.randbelow(5)
    inner = sorted(EXP2_S_F * rng.uniform() for _ in range(m - 1))
    s_knots = np.array([0.0, *inner, EXP2_S_F])
    k_knots = [0.0]
    for piece in range(m):
        # the first piece always bends, so no draw is a plain straight road
        kind = 2 if piece == 0 else rng.randbelow(3)
        if kind == 0:
            k_knots.append(0.0)
        elif kind == 1:
            k_knots.append(k_knots[-1])
        else:
            size = EXP2_K_MAX * (0.25 + 0.75 * rng.uniform())
            k_knots.append(size if rng.randbelow(2) else -size)
    return s_knots, np.array(k_knots)


def gen_experiment2(seed: int, n: int) -> Instance:
    if n < 7:
        raise ValueError("need n >= 7")
    s_knots, k_knots = experiment2_knots(seed)
    s = np.linspace(0.0, EXP2_S_F, n)
    path = PathSpec(EXP2_S_F, np.interp(s, s_knots, k_knots), math.sqrt(EXP2_VMAX2), EXP2_A_N)
    return instance_from_path(path, EXP2_A, EXP2_J, f"exp2-{seed}-{n}")


SINE_V_MAX = 15.0


def gen_sine_path(n: int) -> Instance:
    """``k(s) = 0.2 sin(s / 10)`` over 60 m; the speed cap is SINE_V_MAX."""
    s = np.linspace(0.0, 60.0, n)
    path = PathSpec(60.0, 0.2 * np.sin(s / 10.0), SINE_V_MAX, 4.9)
    return instance_from_path(path, 1.39, 0.5, f"sine-{n}")


CLOTHOID_LENGTHS = (25.0, 15.0, 10.0, 15.0, 25.0)
CLOTHOID_K = 0.02


def clothoid_curvature(s: np.ndarray, k_arc: float = CLOTHOID_K) -> np.ndarray:
    """Line, clothoid, arc, clothoid, line."""
    edges = np.cumsum((0.0,) + CLOTHOID_LENGTHS)
    return np.interp(s, edges, [0.0, 0.0, k_arc, k_arc, 0.0, 0.0])


def gen_clothoid_path(n: int, k_arc: float = CLOTHOID_K) -> Instance:
    if n < 10:
        raise ValueError("need n >= 10")
    s = np.linspace(0.0, 90.0, n)
    path = PathSpec(90.0, clothoid_curvature(s, k_arc), 15.0, 1.0)
    return instance_from_path(path, 1.5, 1.0, f"clothoid-{n}")


# Bounds induced by limits in configuration space ---------------------------


def _chi_lhs(chi, k, k2, A, J):
    r = np.sqrt(chi)
    return 3.0 * k * A * r + J + k2 * chi * r


def solve_chi(k, k2, A, J, J_hat, max_iter: int = 200):
    """Root of ``3 k A sqrt(chi) + J + k2 chi**1.5 = J_hat`` by bisection.

    Entries with ``k = k2 = 0`` give ``inf``. The bracket starts at [0, 1] and
    doubles until it contains the root.
    """
    k, k2 = np.broadcast_arrays(np.abs(np.asarray(k, float)), np.abs(np.asarray(k2, float)))
    out = np.full(k.shape, np.inf)
    live = (k > 0) | (k2 > 0)
    if not live.any():
        return out if out.ndim else float(out)
    kl, k2l = k[live], k2[live]
    lo = np.zeros(kl.shape)
    hi = np.ones(kl.shape)
    while True:
        short = _chi_lhs(hi, kl, k2l, A, J) < J_hat
        if not short.any():
            break
        hi[short] *= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = _chi_lhs(mid, kl, k2l, A, J) < J_hat
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * hi):
            break
    # pick whichever bracket end has the smaller residual
    r_lo = np.abs(_chi_lhs(lo, kl, k2l, A, J) - J_hat)
    r_hi = np.abs(_chi_lhs(hi, kl, k2l, A, J) - J_hat)
    out[live] = np.where(r_lo <= r_hi, lo, hi)
    return out if out.ndim else float(out)


def config_space_bound(k, k2, V_hat, A_hat, J_hat, A, J):
    """Squared-speed cap ``min(V_hat**2, (A_hat - A)/|k|, chi)``."""
    if not A < A_hat:
        raise ValueError("A must be below A_hat")
    if not J < J_hat:
        raise ValueError("J must be below J_hat")
    k = np.abs(np.asarray(k, float))
    k2 = np.asarray(k2, float)
    with np.errstate(divide="ignore"):
        lateral = np.where(k > 0, (A_hat - A) / np.where(k > 0, k, 1.0), np.inf)
    bound = np.minimum(np.minimum(V_hat**2, lateral), solve_chi(k, k2, A, J, J_hat))
    return bound if bound.ndim else float(bound)


def gen_config_space(k, k2, s_f: float, V_hat=50.0, A_hat=5.0, J_hat=1.0,
                     A=None, J=None, name: str = "config") -> Instance:
    """Instance whose caps come from :func:`config_space_bound`; by default the
    path limits are half the configuration-space ones."""
    A = A_hat / 2 if A is None else A
    J = J_hat / 2 if J is None else J
    u = np.array(config_space_bound(k, k2, V_hat, A_hat, J_hat, A, J), dtype=float)
    u[0] = u[-1] = 0.0
    return Instance(s_f / (u.size - 1), u, A, J, name)


# JSON ---------------------------------------------------------------------


def _encode_limit(x: float):
    return None if math.isinf(x) else x


def instance_to_dict(inst: Instance) -> dict:
    d = {"version": SCHEMA_VERSION, "s_f": inst.s_f, "n": inst.n,
         "A": inst.A, "J": _encode_limit(inst.J)}
    if inst.name:
        d["name"] = inst.name
    if inst.path is not None:
        d.update(curvature=inst.path.curvature.tolist(), v_max=inst.path.v_max,
                 A_N=inst.path.A_N)
    else:
        d["u"] = inst.u.tolist()
    return d


def instance_from_dict(d: dict) -> Instance:
    if d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported instance version {d.get('version')!r}")
    n, s_f, A = int(d["n"]), float(d["s_f"]), float(d["A"])
    J = math.inf if d.get("J") is None else float(d["J"])
    name = d.get("name", "")
    if "u" in d:
        u = np.asarray(d["u"], float)
        if u.size != n:
            raise ValueError("length of u does not match n")
        return Instance(s_f / (n - 1), u, A, J, name)
    if "curvature" not in d:
        raise ValueError("instance needs either u or curvature")
    path = PathSpec(s_f, np.asarray(d["curvature"], float), float(d["v_max"]), float(d["A_N"]))
    if path.n != n:
        raise ValueError("length of curvature does not match n")
    return instance_from_path(path, A, J, name)


def save_instance(inst: Instance, fname) -> None:
    Path(fname).write_text(json.dumps(instance_to_dict(inst), indent=1))


def load_instance(fname) -> Instance:
    return instance_from_dict(json.loads(Path(fname).read_text()))
