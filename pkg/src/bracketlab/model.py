"""Experiment designs, decision-sheet lines and aggregate budgets.

All quantities are exact :class:`fractions.Fraction` values. A bundle is a
plain tuple of fractions, one entry per good, expressed in value units
(dollars for Risk/Social, item counts for Shopping).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Iterable, Mapping, Sequence

Bundle = tuple[Fraction, ...]
SubKey = tuple[str, int]

DESIGN_SCHEMA = "bracketlab-design/1"
BUILTIN_DOMAINS = ("risk", "social", "shopping")


def bundle(*quantities) -> Bundle:
    """Build a bundle from numbers or strings, rejecting negative entries."""
    b = tuple(Fraction(q) for q in quantities)
    if any(q < 0 for q in b):
        raise ValueError(f"negative quantity in bundle {b}")
    return b


def add(x: Bundle, y: Bundle) -> Bundle:
    return tuple(a + b for a, b in zip(x, y))


def dominates(y: Bundle, x: Bundle) -> bool:
    """True when y >= x coordinatewise and y != x."""
    return y != x and all(a >= b for a, b in zip(y, x))


def fmt_bundle(b: Bundle) -> str:
    return "(" + ",".join(str(q) for q in b) + ")"


@dataclass(frozen=True)
class DiscreteBudget:
    """One decision sheet: a finite, ordered list of selectable bundles.

    ``kind`` is ``walrasian`` (linear prices), ``piecewise`` (one good's price
    steps up after a threshold) or ``explicit`` (lines given directly).
    Prices are in budget units (tokens or dollars) per unit of each good.

    ``grid`` picks the line rule for the priced kinds:

    * ``token``: line i spends i units of income on good 0 and the rest on
      good 1.
    * ``orange_indexed``: lines run over the good-1 quantity from its maximum
      down to 0, each with the largest affordable good-0 quantity.
    """

    kind: str
    income: Fraction = Fraction(0)
    prices: tuple[Fraction, ...] = ()
    grid: str = "token"
    stepped_good: int = 1
    threshold: Fraction = Fraction(0)
    low_price: Fraction = Fraction(0)
    high_price: Fraction = Fraction(0)
    explicit: tuple[Bundle, ...] = ()

    def __post_init__(self):
        if self.kind == "walrasian":
            if len(self.prices) != 2 or any(p <= 0 for p in self.prices) or self.income <= 0:
                raise ValueError("walrasian budget needs two positive prices and positive income")
            if self.grid not in ("token", "orange_indexed"):
                raise ValueError(f"unknown grid rule {self.grid!r}")
        elif self.kind == "piecewise":
            if len(self.prices) != 2 or self.income <= 0:
                raise ValueError("piecewise budget needs a price pair and positive income")
            if min(self.low_price, self.high_price, self.prices[1 - self.stepped_good]) <= 0:
                raise ValueError("piecewise prices must be positive")
        elif self.kind == "explicit":
            if not self.explicit:
                raise ValueError("explicit budget needs at least one line")
            if len(set(self.explicit)) != len(self.explicit):
                raise ValueError("explicit budget lines must be distinct")
        else:
            raise ValueError(f"unknown budget kind {self.kind!r}")

    @classmethod
    def tokens(cls, income, value_a, value_b) -> "DiscreteBudget":
        """Token budget where one token is worth ``value_a``/``value_b`` of each good."""
        return cls(
            kind="walrasian",
            income=Fraction(income),
            prices=(1 / Fraction(value_a), 1 / Fraction(value_b)),
            grid="token",
        )

    @classmethod
    def shop(cls, income, price_a, price_o) -> "DiscreteBudget":
        return cls(
            kind="walrasian",
            income=Fraction(income),
            prices=(Fraction(price_a), Fraction(price_o)),
            grid="orange_indexed",
        )

    def cost(self, b: Bundle) -> Fraction:
        if self.kind == "walrasian":
            return sum((p * q for p, q in zip(self.prices, b)), Fraction(0))
        if self.kind == "piecewise":
            g = self.stepped_good
            q = b[g]
            stepped = self.low_price * min(q, self.threshold) + self.high_price * max(q - self.threshold, 0)
            return stepped + self.prices[1 - g] * b[1 - g]
        raise ValueError("explicit budgets have no cost function")

    @cached_property
    def lines(self) -> tuple[Bundle, ...]:
        return tuple(enumerate_lines(self))

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def is_walrasian(self) -> bool:
        return self.kind == "walrasian"

    def to_dict(self) -> dict:
        if self.kind == "explicit":
            return {"kind": "explicit", "lines": [[str(q) for q in b] for b in self.explicit]}
        d = {"kind": self.kind, "income": str(self.income), "prices": [str(p) for p in self.prices], "grid": self.grid}
        if self.kind == "piecewise":
            d.update(
                stepped_good=self.stepped_good,
                threshold=str(self.threshold),
                low_price=str(self.low_price),
                high_price=str(self.high_price),
            )
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "DiscreteBudget":
        kind = d["kind"]
        if kind == "explicit":
            return cls(kind="explicit", explicit=tuple(bundle(*b) for b in d["lines"]))
        kw = dict(
            kind=kind,
            income=Fraction(d["income"]),
            prices=tuple(Fraction(p) for p in d["prices"]),
            grid=d.get("grid", "orange_indexed" if kind == "piecewise" else "token"),
        )
        if kind == "piecewise":
            kw.update(
                stepped_good=int(d["stepped_good"]),
                threshold=Fraction(d["threshold"]),
                low_price=Fraction(d["low_price"]),
                high_price=Fraction(d["high_price"]),
            )
        return cls(**kw)


def _floor_div(a: Fraction, b: Fraction) -> int:
    return int(a // b)


def _max_stepped(budget: DiscreteBudget) -> int:
    """Largest integer quantity of the stepped good that fits the income."""
    q = 0
    zero = [Fraction(0), Fraction(0)]
    while True:
        zero[budget.stepped_good] = Fraction(q + 1)
        if budget.cost(tuple(zero)) > budget.income:
            return q
        q += 1


def enumerate_lines(budget: DiscreteBudget) -> list[Bundle]:
    """Canonical decision-sheet lines of a budget, in sheet order."""
    if budget.kind == "explicit":
        return list(budget.explicit)
    if budget.kind == "walrasian" and budget.grid == "token":
        pa, pb = budget.prices
        n = int(budget.income)
        if n != budget.income:
            raise ValueError("token budgets need an integer income")
        return [(Fraction(i) / pa, Fraction(n - i) / pb) for i in range(n + 1)]
    # orange-indexed: good 1 descends from its maximum, good 0 takes what is left
    if budget.kind == "walrasian":
        pa, po = budget.prices
        top = _floor_div(budget.income, po)
        return [(Fraction(_floor_div(budget.income - po * o, pa)), Fraction(o)) for o in range(top, -1, -1)]
    if budget.stepped_good != 1:
        raise ValueError("piecewise sheets are indexed by good 1")
    top = _max_stepped(budget)
    pa = budget.prices[0]
    out = []
    for o in range(top, -1, -1):
        spent = budget.cost((Fraction(0), Fraction(o)))
        out.append((Fraction(_floor_div(budget.income - spent, pa)), Fraction(o)))
    return out


@dataclass(frozen=True)
class Decision:
    id: str
    subdecisions: tuple[DiscreteBudget, ...]

    def __post_init__(self):
        if not self.subdecisions:
            raise ValueError(f"decision {self.id} has no subdecisions")

    @property
    def keys(self) -> list[SubKey]:
        return [(self.id, k) for k in range(1, len(self.subdecisions) + 1)]


@dataclass(frozen=True)
class ExperimentDesign:
    domain: str
    decisions: tuple[Decision, ...]
    goods: tuple[str, ...] = ("A", "B")

    def __post_init__(self):
        ids = [d.id for d in self.decisions]
        if len(set(ids)) != len(ids):
            raise ValueError("decision ids must be unique")

    @cached_property
    def keys(self) -> tuple[SubKey, ...]:
        """Subdecision keys in design order; profiles are indexed this way."""
        return tuple(k for d in self.decisions for k in d.keys)

    @cached_property
    def line_counts(self) -> tuple[int, ...]:
        return tuple(self.budget(k).n_lines for k in self.keys)

    def decision(self, decision_id: str) -> Decision:
        for d in self.decisions:
            if d.id == decision_id:
                return d
        raise KeyError(f"no decision {decision_id!r} in {self.domain} design")

    def budget(self, key: SubKey) -> DiscreteBudget:
        d = self.decision(key[0])
        if not 1 <= key[1] <= len(d.subdecisions):
            raise KeyError(f"no subdecision {key}")
        return d.subdecisions[key[1] - 1]

    def to_dict(self) -> dict:
        return {
            "schema": DESIGN_SCHEMA,
            "domain": self.domain,
            "goods": list(self.goods),
            "decisions": [
                {"id": d.id, "subdecisions": [b.to_dict() for b in d.subdecisions]} for d in self.decisions
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentDesign":
        if d.get("schema") != DESIGN_SCHEMA:
            raise ValueError(f"unsupported design schema {d.get('schema')!r}")
        return cls(
            domain=d.get("domain", "custom"),
            goods=tuple(d.get("goods", ("A", "B"))),
            decisions=tuple(
                Decision(x["id"], tuple(DiscreteBudget.from_dict(b) for b in x["subdecisions"]))
                for x in d["decisions"]
            ),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @cached_property
    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SubjectChoices:
    subject_id: str
    choices: Mapping[SubKey, int] = field(default_factory=dict)

    def validate(self, design: ExperimentDesign) -> None:
        missing = [k for k in design.keys if k not in self.choices]
        if missing:
            raise ValueError(f"subject {self.subject_id}: missing choices for {missing}")
        extra = [k for k in self.choices if k not in design.keys]
        if extra:
            raise ValueError(f"subject {self.subject_id}: unknown subdecisions {extra}")
        for k in design.keys:
            i = self.choices[k]
            if not 0 <= i < design.budget(k).n_lines:
                raise ValueError(f"subject {self.subject_id}: line {i} out of range for {k}")

    def profile(self, design: ExperimentDesign) -> tuple[int, ...]:
        return tuple(self.choices[k] for k in design.keys)

    @classmethod
    def from_profile(cls, design: ExperimentDesign, profile: Sequence[int], subject_id: str = "") -> "SubjectChoices":
        return cls(subject_id, dict(zip(design.keys, (int(i) for i in profile))))

    def bundle(self, design: ExperimentDesign, key: SubKey) -> Bundle:
        return design.budget(key).lines[self.choices[key]]


def _risk_like(domain: str) -> ExperimentDesign:
    six_fifths = Fraction(6, 5)
    tok = DiscreteBudget.tokens
    decisions = (
        Decision("D1", (tok(10, 1, six_fifths), tok(16, 1, 1))),
        Decision("D2", (tok(14, 2, 2),)),
        Decision("D3", (tok(10, 1, 1), tok(10, 1, six_fifths))),
        Decision("D4", (tok(16, 1, 1),)),
        Decision("D5", (tok(10, 1, six_fifths),)),
    )
    goods = ("A", "B")
    return ExperimentDesign(domain, decisions, goods)


def _shopping() -> ExperimentDesign:
    shop = DiscreteBudget.shop
    d2 = DiscreteBudget(
        kind="piecewise",
        income=Fraction(32),
        prices=(Fraction(2), Fraction(2)),
        grid="orange_indexed",
        stepped_good=1,
        threshold=Fraction(8),
        low_price=Fraction(1),
        high_price=Fraction(2),
    )
    decisions = (
        Decision("D1", (shop(8, 2, 1), shop(24, 2, 2))),
        Decision("D2", (d2,)),
        Decision("D3", (shop(30, 3, 3), shop(24, 3, 2))),
        Decision("D4", (shop(12, 1, 1),)),
        Decision("D5", (shop(48, 6, 4),)),
    )
    return ExperimentDesign("shopping", decisions, ("apples", "oranges"))


def build_design(domain: str) -> ExperimentDesign:
    """One of the three built-in five-decision designs."""
    if domain in ("risk", "social"):
        return _risk_like(domain)
    if domain == "shopping":
        return _shopping()
    raise ValueError(f"unknown design {domain!r}; expected one of {BUILTIN_DOMAINS}")


def aggregate_choice(decision: Decision, choices: Sequence[Bundle]) -> Bundle:
    """Final bundle of a decision: the sum of its subdecision choices."""
    if len(choices) != len(decision.subdecisions):
        raise ValueError(
            f"decision {decision.id} has {len(decision.subdecisions)} subdecisions, got {len(choices)} choices"
        )
    out = choices[0]
    for c in choices[1:]:
        out = add(out, c)
    return out


@dataclass(frozen=True)
class AggregateBudget:
    """Minkowski sum of a decision's line sets.

    ``members`` maps each distinct final bundle to the line-index tuples that
    produce it; ``frontier`` holds the undominated members.
    """

    members: Mapping[Bundle, tuple[tuple[int, ...], ...]]
    frontier: frozenset

    @property
    def bundles(self) -> tuple[Bundle, ...]:
        return tuple(self.members)

    def on_frontier(self, b: Bundle) -> bool:
        return b in self.frontier


def pareto_frontier(points: Iterable[Bundle]) -> frozenset:
    pts = list(set(points))
    return frozenset(p for p in pts if not any(dominates(q, p) for q in pts))


_AGG_CACHE: dict = {}


def aggregate_budget(decision: Decision) -> AggregateBudget:
    cached = _AGG_CACHE.get(decision)
    if cached is not None:
        return cached
    members: dict[Bundle, list[tuple[int, ...]]] = {}
    sheets = [b.lines for b in decision.subdecisions]
    for idx in product(*(range(len(s)) for s in sheets)):
        x = aggregate_choice(decision, [s[i] for s, i in zip(sheets, idx)])
        members.setdefault(x, []).append(idx)
    agg = AggregateBudget({k: tuple(v) for k, v in members.items()}, pareto_frontier(members))
    _AGG_CACHE[decision] = agg
    return agg
