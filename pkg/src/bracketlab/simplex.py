"""Exact rational phase-1 simplex.

Solves ``A x = b, x >= 0`` exactly and returns either a feasible point or a
Farkas multiplier ``y`` with ``A^T y >= 0`` and ``b^T y < 0``. The tableau is
kept fraction-free (integer pivoting: every entry is the true value times the
current common denominator, and each update divides exactly by the previous
pivot), and Bland's rule keeps it from cycling. Intended for the small
systems produced by the lottery tests (tens of equations, hundreds of
columns), where exactness matters more than speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

Number = int | Fraction


@dataclass(frozen=True)
class Phase1Result:
    feasible: bool
    x: tuple[Fraction, ...] | None  # primal point when feasible
    farkas: tuple[Fraction, ...] | None  # A^T y >= 0, b^T y < 0 when infeasible
    pivots: int


def _integer_rows(A, b) -> tuple[list[list[int]], list[int], list[int]]:
    """Scale each equation to integers with a nonnegative right-hand side."""
    rows, rhs, scale = [], [], []
    for ai, bi in zip(A, b):
        den = Fraction(bi).denominator
        for v in ai:
            den = math.lcm(den, Fraction(v).denominator)
        s = den if bi >= 0 else -den
        rows.append([int(Fraction(v) * s) for v in ai])
        rhs.append(int(Fraction(bi) * s))
        scale.append(s)
    return rows, rhs, scale


def phase1(A: Sequence[Sequence[Number]], b: Sequence[Number], max_pivots: int = 100_000) -> Phase1Result:
    m = len(A)
    n = len(A[0]) if m else 0
    if len(b) != m:
        raise ValueError("A and b disagree on the number of equations")
    if any(len(row) != n for row in A):
        raise ValueError("ragged constraint matrix")
    if m == 0:
        return Phase1Result(True, tuple(Fraction(0) for _ in range(n)), None, 0)

    rows, rhs, scale = _integer_rows(A, b)
    width = n + m
    # tableau rows [A | I | b]; row m holds the reduced costs of min sum(artificials)
    T = [rows[i] + [1 if j == i else 0 for j in range(m)] + [rhs[i]] for i in range(m)]
    T.append([-sum(rows[i][j] for i in range(m)) for j in range(n)] + [0] * m + [-sum(rhs)])
    basis = list(range(n, n + m))
    d = 1  # common denominator of every tableau entry

    pivots = 0
    while True:
        obj = T[m]
        enter = next((j for j in range(width) if obj[j] < 0), None)
        if enter is None:
            break
        leave = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                if leave is None:
                    leave = i
                    continue
                # compare rhs_i / a_i with the incumbent ratio; ties go to the lower basic index
                lhs = T[i][-1] * T[leave][enter]
                cur = T[leave][-1] * a
                if lhs < cur or (lhs == cur and basis[i] < basis[leave]):
                    leave = i
        if leave is None:
            raise ArithmeticError("phase-1 objective is bounded below; an unbounded ray is impossible")
        _pivot(T, leave, enter, d)
        d = T[leave][enter]
        basis[leave] = enter
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex exceeded its pivot budget")

    obj = T[m]
    if obj[-1] == 0:
        x = [Fraction(0)] * n
        for i, j in enumerate(basis):
            if j < n:
                x[j] = Fraction(T[i][-1], d)
        return Phase1Result(True, tuple(x), None, pivots)
    # phase-1 multipliers are y_i = 1 - (reduced cost of artificial i); negate them
    # and undo the row scaling to get the Farkas vector of the original system
    farkas = tuple(-(1 - Fraction(obj[n + i], d)) * scale[i] for i in range(m))
    return Phase1Result(False, None, farkas, pivots)


def _pivot(T: list[list[int]], r: int, c: int, d: int) -> None:
    """Integer pivot: the pivot row is kept, every other row becomes (row*pv - f*prow) / d."""
    prow = T[r]
    pv = prow[c]
    nz = [j for j, v in enumerate(prow) if v != 0]
    for i in range(len(T)):
        if i == r:
            continue
        row = T[i]
        f = row[c]
        new = [v * pv // d if v else 0 for v in row]
        if f:
            for j in nz:
                new[j] = (row[j] * pv - f * prow[j]) // d
        T[i] = new
