from __future__ import annotations

from fractions import Fraction as F

import pytest

from bracketlab.power import (
    BudgetExceeded,
    default_tests,
    exact_pass_probabilities,
    exact_pass_probability,
    mc_pass_probability,
    power_table,
    to_csv,
)

# exact fractions at 0, 1 and 2 errors, enumerated once and frozen
TABLE = {
    "nb_warp.d11_d5": [F(1, 11), F(31, 121), F(49, 121)],
    "nb_warp.d12_d4": [F(1, 17), F(49, 289), F(79, 289)],
    "nb_warp.all": [F(1, 2057), F(1559, 384659), F(5645, 384659)],
    "bb_mon.d1": [F(27, 187), F(52, 187), F(75, 187)],
    "bb_mon.d3": [F(21, 121), F(40, 121), F(57, 121)],
    "bb_mon.both": [F(567, 22627), F(1605, 22627), F(3022, 22627)],
}


@pytest.mark.parametrize("test", sorted(TABLE))
def test_exact_fractions(risk, test):
    got = [r.probability for r in exact_pass_probabilities(risk, test, 2)]
    assert got == TABLE[test]


def test_nb_warp_pairs_with_same_sheets_agree(risk):
    a = exact_pass_probabilities(risk, "nb_warp.d11_d5", 2)
    for other in ("nb_warp.d32_d5", "nb_warp.d11_d32"):
        assert [r.probability for r in exact_pass_probabilities(risk, other, 2)] == [r.probability for r in a]


def test_bb_warp_both_rules(risk):
    from bracketlab.errors import TestOptions

    exact = [r.probability for r in exact_pass_probabilities(risk, "bb_warp.d1_d2", 2)]
    acoord = [r.probability for r in exact_pass_probabilities(risk, "bb_warp.d1_d2", 2, TestOptions(bbwarp_rule="a-coordinate"))]
    assert exact == [F(377, 935), F(271, 561), F(531, 935)]
    assert acoord == [F(397, 935), F(1597, 2805), F(382, 561)]


def test_full_tests_match_areas(risk):
    nb = exact_pass_probabilities(risk, "nb_sarp", 3)
    assert [r.hits for r in nb] == [6, 87, 606, 2785]
    assert nb[0].probability == F(6, 63_468_735)
    bb = exact_pass_probability(risk, "bb_sarp", 0)
    assert bb.probability == F(12, 63_468_735)


def test_budget_guard(risk):
    with pytest.raises(BudgetExceeded):
        exact_pass_probabilities(risk, "nb_sarp", 0, budget=1000)
    with pytest.raises(BudgetExceeded):
        exact_pass_probabilities(risk, "nb_sarp.plain", 0)


def test_mc_agrees_with_exact(risk):
    r = mc_pass_probability(risk, "nb_warp.d11_d5", 0, 20_000, seed=3)
    assert abs(r.probability - 1 / 11) <= 4 * r.std_error
    r = mc_pass_probability(risk, "bb_mon.d1", 1, 20_000, seed=4)
    assert abs(r.probability - 52 / 187) <= 4 * r.std_error


def test_mc_reproducible_and_worker_independent(risk):
    a = mc_pass_probability(risk, "bb_mon.both", 1, 5000, seed=7)
    b = mc_pass_probability(risk, "bb_mon.both", 1, 5000, seed=7, workers=3)
    assert (a.hits, a.probability) == (b.hits, b.probability)
    c = mc_pass_probability(risk, "bb_mon.both", 1, 5000, seed=8)
    assert c.samples == 5000 and c.seed == 8


def test_mc_rejects_bad_arguments(risk):
    with pytest.raises(ValueError):
        mc_pass_probability(risk, "nb_warp.d11_d5", 0, 0, seed=1)
    with pytest.raises(KeyError):
        mc_pass_probability(risk, "nope", 0, 10, seed=1)


def test_power_table_falls_back_to_mc(risk):
    rows = power_table(risk, ["nb_warp.d11_d5", "nb_sarp.plain"], max_errors=0, samples=200, seed=1)
    assert [(r.test, r.method) for r in rows] == [("nb_warp.d11_d5", "exact"), ("nb_sarp.plain", "mc")]
    text = to_csv(rows)
    assert text.splitlines()[0].startswith("test,errors,method,probability,fraction")
    assert "1/11" in text
    with pytest.raises(ValueError):
        power_table(risk, ["nb_warp.d11_d5"], method="guess")


def test_default_tests(risk, shopping):
    assert "pnb" in default_tests(risk)
    assert default_tests(shopping) == ("induced.narrow", "induced.broad", "induced.pnb")
