import numpy as np
import pytest
from hypothesis import given, strategies as st

from jerkplan.acc import solve_acc
from jerkplan.oracle import acc_rows, fixpoint_max
from support import random_monotone_data


def test_zero_box():
    assert np.array_equal(solve_acc(np.zeros(6), np.ones(5), np.ones(5)), np.zeros(6))


def test_small_example():
    out = solve_acc(np.array([0.0, 10.0, 10.0, 0.0]), np.full(3, 4.0), np.full(3, 4.0))
    assert out.tolist() == [0.0, 4.0, 4.0, 0.0]


def test_feasible_input_unchanged():
    y = np.array([0.0, 1.0, 2.0, 1.5, 0.0])
    assert np.array_equal(solve_acc(y, np.full(4, 2.0), np.full(4, 2.0)), y)


def test_negative_rhs_rejected():
    with pytest.raises(ValueError):
        solve_acc(np.zeros(3), np.array([1.0, -1.0]), np.ones(2))


@given(st.integers(0, 100_000), st.integers(3, 100))
def test_matches_fixpoint(seed, n):
    rng = np.random.default_rng(seed)
    y, bA, bD, *_ = random_monotone_data(rng, n)
    out = solve_acc(y, bA, bD)
    ref = fixpoint_max(y, acc_rows(bA, bD))
    assert np.max(np.abs(out - ref)) <= 1e-12
    assert np.all(out <= y)
    step = np.diff(out)
    assert np.all(step - bA <= 1e-12) and np.all(-step - bD <= 1e-12)


@given(st.integers(0, 100_000), st.integers(3, 60))
def test_monotone_in_upper_bound(seed, n):
    rng = np.random.default_rng(seed)
    y, bA, bD, *_ = random_monotone_data(rng, n)
    y2 = y + rng.uniform(0.0, 2.0, n)
    assert np.all(solve_acc(y2, bA, bD) >= solve_acc(y, bA, bD))
