"""Independent oracles shared by the unit and acceptance tests."""

from __future__ import annotations

import random
from fractions import Fraction as F
from itertools import combinations

from bracketlab.pnb import FarkasSystem

def _solve_square(M, rhs):
    """Exact Gauss-Jordan; None when singular."""
    n = len(M)
    A = [list(map(F, row)) + [F(r)] for row, r in zip(M, rhs)]
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return None
        A[c], A[piv] = A[piv], A[c]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c] / A[c][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [A[i][n] / A[i][i] for i in range(n)]


def _rank(rows):
    A = [list(map(F, r)) for r in rows]
    rank, cols = 0, len(A[0]) if A else 0
    for c in range(cols):
        piv = next((r for r in range(rank, len(A)) if A[r][c] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        for r in range(len(A)):
            if r != rank and A[r][c] != 0:
                f = A[r][c] / A[rank][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[rank])]
        rank += 1
    return rank


def oracle_rationalizable(system: FarkasSystem) -> bool:
    """No phi >= 0 with sum(phi_strict) = 1 and phi.rows = 0, by enumerating vertices.

    The polytope {phi >= 0 : sum of strict weights = 1, combination = 0} is
    nonempty iff it has a vertex, i.e. a basic solution supported on a set of
    linearly independent columns. Every such support is tried.
    """
    cols = [list(r) for r in system.strict_rows] + [list(r) for r in system.weak_rows]
    n_s = len(system.strict_rows)
    # equations: dim coordinates plus the normalization row
    eq_cols = [c + [F(1) if j < n_s else F(0)] for j, c in enumerate(cols)]
    m = system.dim + 1
    rhs = [F(0)] * system.dim + [F(1)]
    for size in range(1, min(m, len(cols)) + 1):
        for support in combinations(range(len(cols)), size):
            block = [eq_cols[j] for j in support]
            if _rank(block) < size:
                continue
            # least-squares-free exact solve: pick `size` independent equation rows
            rows_t = [[block[j][i] for j in range(size)] for i in range(m)]
            chosen = []
            for i in range(m):
                if _rank([rows_t[k] for k in chosen + [i]]) > len(chosen):
                    chosen.append(i)
                if len(chosen) == size:
                    break
            sol = _solve_square([rows_t[i] for i in chosen], [rhs[i] for i in chosen])
            if sol is None or any(v < 0 for v in sol):
                continue
            if all(sum(rows_t[i][j] * sol[j] for j in range(size)) == rhs[i] for i in range(m)):
                return False
    return True


def random_system(rng: random.Random) -> FarkasSystem:
    dim = rng.randint(2, 4)

    def prob_vec():
        w = [rng.randint(0, 3) for _ in range(dim)]
        if sum(w) == 0:
            w[rng.randrange(dim)] = 1
        return [F(x, sum(w)) for x in w]

    def diff():
        p, q = prob_vec(), prob_vec()
        return tuple(a - b for a, b in zip(p, q))

    strict = tuple(diff() for _ in range(rng.randint(1, 4)))
    weak = tuple(diff() for _ in range(rng.randint(0, 2)))
    return FarkasSystem(dim, strict, weak)


def check_result(system: FarkasSystem, res) -> None:
    if res.rationalizable:
        u = res.utility
        assert all(sum(a * b for a, b in zip(r, u)) > 0 for r in system.strict_rows)
        assert all(sum(a * b for a, b in zip(r, u)) >= 0 for r in system.weak_rows)
    else:
        ps, pw = res.certificate
        assert all(p >= 0 for p in ps + pw) and sum(ps) == 1
        combo = [sum(p * r[i] for p, r in zip(ps + pw, system.strict_rows + system.weak_rows)) for i in range(system.dim)]
        assert all(c == 0 for c in combo)
