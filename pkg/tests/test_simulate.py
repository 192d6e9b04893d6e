from __future__ import annotations

from fractions import Fraction as F

import numpy as np
import pytest

from bracketlab.errors import passes
from bracketlab.induced import UtilityModel, alpha_ranges, estimate_alpha
from bracketlab.report import AnalysisConfig, classify_subject
from bracketlab.simulate import AgentSpec, Population, recovery_experiment, simulate_subject

# frozen zero- to three-error area counts (see test_classify)
RISK_AREAS = {"narrow": [6, 87, 606, 2785], "broad": [12, 116, 585, 2071], "pnb": [36804, 206331, 615160, 1364535]}  # k/10 grid


def _apples(design, choices, did):
    return [int(design.budget(k).lines[choices.choices[k]][0]) for k in design.decision(did).keys]


def test_induced_agents_hit_point_predictions(shopping):
    n = simulate_subject(AgentSpec(UtilityModel.induced(), "narrow"), shopping).choices
    assert _apples(shopping, n, "D1") + _apples(shopping, n, "D3") == [1, 6, 5, 4]
    b = simulate_subject(AgentSpec(UtilityModel.induced(), "broad"), shopping).choices
    assert _apples(shopping, b, "D1") + _apples(shopping, b, "D3") == [0, 10, 10, 0]


def test_linear_agents_identical_across_bracketing(risk, shopping):
    u = UtilityModel.linear(1, 1)
    for design in (risk, shopping):
        outs = [simulate_subject(AgentSpec(u, m, F(1, 2) if m == "pnb" else None), design).choices.choices for m in ("narrow", "broad", "pnb")]
        assert outs[0] == outs[1] == outs[2]


def test_spec_validation():
    u = UtilityModel.ces(F(1, 2))
    with pytest.raises(ValueError):
        AgentSpec(u, "pnb")
    with pytest.raises(ValueError):
        AgentSpec(u, "narrow", tremble=1.0)
    with pytest.raises(ValueError):
        AgentSpec(u, "wide")
    spec = AgentSpec(u, "pnb", F(3, 10), 0.1, 5)
    assert AgentSpec.from_dict(spec.to_dict()) == spec


def test_trembles_move_one_line(risk):
    spec = AgentSpec(UtilityModel.ces(F(1, 2)), "narrow", tremble=0.5)
    sub = simulate_subject(spec, risk, "x", np.random.default_rng(1))
    for key in risk.keys:
        assert abs(sub.choices.choices[key] - sub.optimum[key]) <= 1
    moved = {f"{k[0]}.{k[1]}" for k in risk.keys if sub.choices.choices[k] != sub.optimum[k]}
    assert moved == set(sub.trembles)


def test_population_is_seeded(risk):
    pop = Population.from_dict(
        {"seed": 4, "agents": [{"utility": {"kind": "ces", "exponent": "1/2"}, "bracketing": "narrow", "tremble": 0.3, "count": 5}]}
    )
    a = [s.choices for _, s in pop.subjects(risk)]
    b = [s.choices for _, s in pop.subjects(risk)]
    assert a == b and [c.subject_id for c in a] == [f"s{i:04d}" for i in range(1, 6)]
    with pytest.raises(ValueError):
        Population.from_dict({"agents": [{"bracketing": "narrow", "count": 0}]})


@pytest.mark.parametrize("r", [F(3, 10), F(1, 2), F(4, 5)])
def test_zero_tremble_agents_pass_their_sarp(risk, r):
    u = UtilityModel.ces(r)
    assert passes(risk, simulate_subject(AgentSpec(u, "narrow"), risk).choices, "nb_sarp")
    assert passes(risk, simulate_subject(AgentSpec(u, "broad"), risk).choices, "bb_sarp")


def test_broad_agents_fail_narrow_when_warp_breaks(risk):
    u = UtilityModel.ces(F(1, 2))
    ch = simulate_subject(AgentSpec(u, "broad"), risk).choices
    if not passes(risk, ch, "nb_warp.all"):
        assert not passes(risk, ch, "nb_sarp")


def test_recovery_of_narrow_agents(risk):
    cfg = AnalysisConfig()

    def analyzer(design, choices):
        return classify_subject(design, choices, cfg, RISK_AREAS).label

    pop = Population(((AgentSpec(UtilityModel.ces(F(1, 2)), "narrow"), 100),), seed=1)
    assert recovery_experiment(pop, risk, 1, analyzer) == {"narrow": {"narrow": 100}}
    with pytest.raises(ValueError):
        recovery_experiment(pop, risk, 0, analyzer)


def test_pnb_shopping_agents_recover_alpha(shopping):
    ranges = alpha_ranges(shopping)
    ch = simulate_subject(AgentSpec(UtilityModel.induced(), "pnb", F(1, 2)), shopping).choices
    est = estimate_alpha(shopping, ch, ranges)
    assert est.errors == 0 and est.range.contains(F(1, 2))
