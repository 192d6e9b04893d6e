from __future__ import annotations

import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bracketlab.model import (
    Decision,
    DiscreteBudget,
    ExperimentDesign,
    SubjectChoices,
    aggregate_budget,
    aggregate_choice,
    build_design,
    bundle,
    enumerate_lines,
)


def test_risk_design_table(risk):
    d1 = risk.decision("D1")
    assert [b.income for b in d1.subdecisions] == [10, 16]
    d2 = risk.decision("D2")
    assert len(d2.subdecisions) == 1 and d2.subdecisions[0].income == 14
    # $2 per token for each good means a price of 1/2 token per dollar
    assert d2.subdecisions[0].prices == (F(1, 2), F(1, 2))
    assert risk.line_counts == (11, 17, 15, 11, 11, 17, 11)


def test_shopping_design_table(shopping):
    d5 = shopping.decision("D5").subdecisions[0]
    assert (d5.income, d5.prices) == (48, (6, 4))
    assert shopping.decision("D2").subdecisions[0].kind == "piecewise"
    assert shopping.line_counts == (9, 13, 21, 11, 13, 13, 13)


def test_social_design_table(social):
    b = social.budget(("D3", 2))
    assert b.income == 10
    assert b.lines[0] == (0, F(12)) and b.lines[10] == (10, 0)


def test_unknown_domain():
    with pytest.raises(ValueError):
        build_design("casino")


def test_risk_d11_lines(risk):
    lines = risk.budget(("D1", 1)).lines
    assert len(lines) == 11
    assert lines[0] == (0, 12) and lines[1] == (1, F(54, 5)) and lines[10] == (10, 0)


def test_shopping_d11_lines(shopping):
    lines = shopping.budget(("D1", 1)).lines
    assert len(lines) == 9
    assert [o for _, o in lines] == list(range(8, -1, -1))
    assert all(a == (8 - o) // 2 for a, o in lines)
    i, j = lines.index((1, 6)), lines.index((2, 4))
    assert j - i == 2 and lines[i + 1] == (1, 5)


def test_shopping_d2_piecewise(shopping):
    lines = shopping.budget(("D2", 1)).lines
    assert len(lines) == 21

    def cost(o):
        return o if o <= 8 else 8 + 2 * (o - 8)

    assert list(lines) == [((32 - cost(o)) // 2, o) for o in range(20, -1, -1)]


def test_aggregate_choice_examples(risk, shopping):
    d1 = risk.decision("D1")
    x = aggregate_choice(d1, [d1.subdecisions[0].lines[0], d1.subdecisions[1].lines[8]])
    assert x == (8, 20)
    d2 = risk.decision("D2")
    y = d2.subdecisions[0].lines[3]
    assert aggregate_choice(d2, [y]) == y
    d3 = shopping.decision("D3")
    assert aggregate_choice(d3, [(5, 5), (4, 6)]) == (9, 11)
    with pytest.raises(ValueError):
        aggregate_choice(d3, [(5, 5)])


def test_aggregate_budget_d1(risk):
    agg = aggregate_budget(risk.decision("D1"))
    for a in range(17):
        assert agg.on_frontier(bundle(a, 28 - a))
    for a in range(17, 27):
        assert agg.on_frontier(bundle(a, F(6, 5) * (26 - a)))
    assert (10, 17) in agg.members and not agg.on_frontier(bundle(10, 17))
    assert agg.on_frontier(bundle(10, 18))
    assert len(agg.members) <= 187


def test_aggregate_budget_single(risk):
    d4 = risk.decision("D4")
    agg = aggregate_budget(d4)
    assert set(agg.members) == set(d4.subdecisions[0].lines)
    assert all(agg.on_frontier(b) for b in agg.members)


def test_risk_social_identical_lines(risk, social):
    for k in risk.keys:
        assert risk.budget(k).lines == social.budget(k).lines


def test_design_json_round_trip(risk, shopping):
    for d in (risk, shopping):
        back = ExperimentDesign.from_dict(json.loads(d.to_json()))
        assert back == d and back.hash == d.hash
    assert risk.hash == "e2e595b9db38d6c7"


def test_subject_choices_validation(risk):
    ch = SubjectChoices.from_profile(risk, [0] * 7, "x")
    ch.validate(risk)
    with pytest.raises(ValueError):
        SubjectChoices("x", {("D1", 1): 0}).validate(risk)
    with pytest.raises(ValueError):
        SubjectChoices.from_profile(risk, [11, 0, 0, 0, 0, 0, 0]).validate(risk)


def test_budget_validation():
    with pytest.raises(ValueError):
        DiscreteBudget(kind="walrasian", income=F(0), prices=(F(1), F(1)))
    with pytest.raises(ValueError):
        DiscreteBudget(kind="explicit", explicit=((1, 1), (1, 1)))
    with pytest.raises(ValueError):
        Decision("D1", ())


incomes = st.integers(min_value=1, max_value=30)
prices = st.fractions(min_value=F(1, 4), max_value=4, max_denominator=5)


@settings(max_examples=60, deadline=None)
@given(incomes, prices, prices)
def test_token_lines_property(income, va, vb):
    b = DiscreteBudget.tokens(income, va, vb)
    lines = enumerate_lines(b)
    assert len(lines) == income + 1 and len(set(lines)) == len(lines)
    assert all(b.cost(x) == income for x in lines)
    assert enumerate_lines(b) == lines


@settings(max_examples=60, deadline=None)
@given(incomes, st.integers(1, 6), st.integers(1, 6))
def test_orange_indexed_lines_property(income, pa, po):
    b = DiscreteBudget.shop(income, pa, po)
    lines = b.lines
    assert len(set(lines)) == len(lines)
    assert [o for _, o in lines] == list(range(income // po, -1, -1))
    for a, o in lines:
        assert b.cost((a, o)) <= income < b.cost((a + 1, o))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8))
def test_aggregate_budget_is_minkowski_sum(i1, i2):
    d = Decision("D", (DiscreteBudget.tokens(i1, 1, F(6, 5)), DiscreteBudget.tokens(i2, 1, 1)))
    agg = aggregate_budget(d)
    sums = {tuple(x + y for x, y in zip(a, b)) for a in d.subdecisions[0].lines for b in d.subdecisions[1].lines}
    assert set(agg.members) == sums
    for x in agg.members:
        dominated = any(y != x and all(p >= q for p, q in zip(y, x)) for y in sums)
        assert agg.on_frontier(x) == (not dominated)
