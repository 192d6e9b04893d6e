from __future__ import annotations

import random
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bracketlab.classify import broad_set, narrow_set
from bracketlab.errors import (
    TESTS,
    Perturbation,
    TestOptions,
    applicable_tests,
    format_errors,
    get_test,
    line_distance,
    min_errors_to_pass,
    offsets,
    passes,
    profile_distance,
    run_tests,
)
from bracketlab.model import SubjectChoices

STABLE_NAMES = {
    "nb_warp.d11_d5",
    "nb_warp.d12_d4",
    "nb_warp.d32_d5",
    "nb_warp.d11_d32",
    "nb_warp.all",
    "bb_warp.d1_d2",
    "bb_mon.d1",
    "bb_mon.d3",
    "bb_mon.both",
    "nb_sarp",
    "bb_sarp",
    "pnb",
}


def _sub(design, prof):
    return SubjectChoices.from_profile(design, prof, "x")


def test_registry_names(risk, shopping):
    assert STABLE_NAMES <= set(TESTS)
    assert {f"{t}.{d}" for t in ("nb_sym", "bb_sym", "pnb_sym") for d in ("d1", "d3", "both")} <= set(TESTS)
    assert set(applicable_tests(shopping)) == {"induced.narrow", "induced.broad", "induced.pnb"}
    assert "nb_sarp" in applicable_tests(risk)
    with pytest.raises(KeyError):
        get_test("no_such_test")


def test_line_distance(risk):
    b = risk.budget(("D1", 1))
    assert line_distance(b, 3, 5) == 2
    with pytest.raises(IndexError):
        line_distance(b, 0, 11)


def test_nb_warp_two_errors(risk):
    prof = [3, 8, 7, 5, 5, 8, 5]
    assert min_errors_to_pass(risk, _sub(risk, prof), "nb_warp.d11_d5") == 2
    assert not passes(risk, _sub(risk, prof), "nb_warp.d11_d5")


def test_cap_and_format(risk):
    prof = [0, 0, 0, 0, 10, 0, 10]
    assert min_errors_to_pass(risk, _sub(risk, prof), "nb_warp.d11_d5", cap=3) is None
    assert format_errors(None, 3) == ">3" and format_errors(2, 3) == 2
    with pytest.raises(ValueError):
        min_errors_to_pass(risk, _sub(risk, prof), "nb_warp.d11_d5", cap=-1)


def test_perturbation(risk):
    ch = _sub(risk, [0] * 7)
    p = Perturbation(((("D1", 1), 2), (("D2", 1), 1)))
    assert p.cost == 3
    assert p.apply(risk, ch).choices[("D1", 1)] == 2
    with pytest.raises(IndexError):
        Perturbation(((("D1", 1), -1),)).apply(risk, ch)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4))
def test_offsets_enumerate_l1_sphere(n, cost):
    got = list(offsets(n, cost))
    assert len(got) == len(set(got))
    assert all(sum(map(abs, v)) == cost and len(v) == n for v in got)
    assert got == sorted(got)
    # size of the L1 sphere in Z^n
    expect = 1 if cost == 0 else sum(comb(n, k) * comb(cost - 1, k - 1) * 2**k for k in range(1, n + 1))
    assert len(got) == expect


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10), st.integers(0, 10))
def test_nb_warp_errors_equal_line_gap(risk, a, b):
    prof = [a, 8, 7, 5, 5, 8, b]
    assert min_errors_to_pass(risk, _sub(risk, prof), "nb_warp.d11_d5", cap=10) == abs(a - b)


def test_sarp_errors_equal_distance_to_zero_set(risk):
    """Search-based error counts agree with distances to the enumerated zero-error set."""
    rng = random.Random(2)
    for model, test, zero in (("narrow", "nb_sarp", narrow_set(risk)), ("broad", "bb_sarp", broad_set(risk))):
        for _ in range(15):
            base = list(rng.choice(zero))
            for _ in range(rng.randint(0, 3)):
                i = rng.randrange(7)
                base[i] = min(max(base[i] + rng.choice((-1, 1)), 0), risk.line_counts[i] - 1)
            d = min(profile_distance(base, z) for z in zero)
            assert min_errors_to_pass(risk, _sub(risk, base), test, cap=3) == d, (model, base)


def test_induced_errors(shopping):
    assert run_tests(shopping, _sub(shopping, [0] * 7)) == {"induced.narrow": False, "induced.broad": False, "induced.pnb": False}


def test_bbwarp_rule_option(risk):
    prof = [5, 3, 4, 5, 5, 8, 5]
    assert not passes(risk, _sub(risk, prof), "bb_warp.d1_d2")
    assert passes(risk, _sub(risk, prof), "bb_warp.d1_d2", TestOptions(bbwarp_rule="a-coordinate"))
    with pytest.raises(ValueError):
        TestOptions(bbwarp_rule="nearest")
