from __future__ import annotations

from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from bracketlab.simplex import phase1


def _check(A, b, res):
    if res.feasible:
        x = res.x
        assert all(v >= 0 for v in x)
        for row, bi in zip(A, b):
            assert sum(F(a) * v for a, v in zip(row, x)) == bi
    else:
        y = res.farkas
        for j in range(len(A[0])):
            assert sum(F(A[i][j]) * y[i] for i in range(len(A))) >= 0
        assert sum(F(bi) * yi for bi, yi in zip(b, y)) < 0


def test_feasible_point():
    A = [[1, 1, 0], [0, 1, 1]]
    b = [2, 3]
    res = phase1(A, b)
    assert res.feasible
    _check(A, b, res)


def test_infeasible_certificate():
    A = [[1, 1], [1, 1]]
    b = [1, 2]
    res = phase1(A, b)
    assert not res.feasible
    _check(A, b, res)


def test_rational_data_and_negative_rhs():
    A = [[F(1, 3), F(-1, 2)], [1, 1]]
    b = [F(-1, 6), 1]
    res = phase1(A, b)
    assert res.feasible
    _check(A, b, res)


def test_shape_errors():
    with pytest.raises(ValueError):
        phase1([[1, 2], [1]], [1, 1])
    with pytest.raises(ValueError):
        phase1([[1, 2]], [1, 2])


def test_empty_system():
    assert phase1([], []).feasible


systems = st.integers(1, 4).flatmap(
    lambda m: st.integers(1, 5).flatmap(
        lambda n: st.tuples(
            st.lists(st.lists(st.integers(-3, 3), min_size=n, max_size=n), min_size=m, max_size=m),
            st.lists(st.integers(-4, 4), min_size=m, max_size=m),
        )
    )
)


@settings(max_examples=200, deadline=None)
@given(systems)
def test_phase1_matches_float_lp(sys_):
    A, b = sys_
    res = phase1(A, b)
    _check(A, b, res)
    lp = linprog(np.zeros(len(A[0])), A_eq=np.array(A, float), b_eq=np.array(b, float), bounds=(0, None), method="highs")
    assert res.feasible == (lp.status == 0)
