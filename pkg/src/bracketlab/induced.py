"""Induced payoffs for the Shopping task, model point predictions and alpha identification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from itertools import product
from typing import Callable, Mapping, Sequence

import mpmath
import numpy as np

from .model import Bundle, Decision, ExperimentDesign, SubjectChoices, add, aggregate_choice


# --- exact sums of square roots ----------------------------------------------


def _squarefree(n: int) -> tuple[int, int]:
    """n = s^2 * r with r squarefree; returns (s, r)."""
    if n < 0:
        raise ValueError("square root of a negative number")
    if n == 0:
        return 0, 1
    s, r = 1, 1
    d = 2
    while d * d <= n:
        while n % (d * d) == 0:
            n //= d * d
            s *= d
        d += 1
    return s, n * r


@total_ordering
@dataclass(frozen=True)
class Surd:
    """Finite sum ``sum_r c_r * sqrt(r)`` over distinct squarefree radicands r.

    Square roots of distinct squarefree integers are linearly independent over
    the rationals, so the value is zero iff every coefficient is zero; any
    other sign is settled numerically at increasing precision.
    """

    terms: tuple[tuple[int, Fraction], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[int, Fraction]) -> "Surd":
        return cls(tuple(sorted((r, Fraction(c)) for r, c in mapping.items() if c != 0)))

    @classmethod
    def rational(cls, q) -> "Surd":
        return cls.of({1: Fraction(q)})

    @classmethod
    def sqrt(cls, q) -> "Surd":
        q = Fraction(q)
        # sqrt(n/d) = sqrt(n d) / d
        s, r = _squarefree(q.numerator * q.denominator)
        return cls.of({r: Fraction(s, q.denominator)})

    def _map(self) -> dict[int, Fraction]:
        return dict(self.terms)

    def __add__(self, other) -> "Surd":
        other = other if isinstance(other, Surd) else Surd.rational(other)
        acc = self._map()
        for r, c in other.terms:
            acc[r] = acc.get(r, Fraction(0)) + c
        return Surd.of(acc)

    __radd__ = __add__

    def __neg__(self) -> "Surd":
        return Surd(tuple((r, -c) for r, c in self.terms))

    def __sub__(self, other) -> "Surd":
        other = other if isinstance(other, Surd) else Surd.rational(other)
        return self + (-other)

    def __rsub__(self, other) -> "Surd":
        return Surd.rational(other) - self

    def __mul__(self, k) -> "Surd":
        k = Fraction(k)
        return Surd.of({r: c * k for r, c in self.terms})

    __rmul__ = __mul__

    def sign(self) -> int:
        if not self.terms:
            return 0
        if len(self.terms) == 1:
            return 1 if self.terms[0][1] > 0 else -1
        dps = 30
        while True:
            with mpmath.workdps(dps):
                v = mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * mpmath.sqrt(r) for r, c in self.terms)
                if abs(v) > mpmath.mpf(10) ** (-(dps // 2)):
                    return 1 if v > 0 else -1
            dps *= 2
            if dps > 4000:
                raise ArithmeticError("could not resolve the sign of a nonzero surd")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Surd):
            other = Surd.rational(other)
        return self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def __lt__(self, other) -> bool:
        return (self - other).sign() < 0

    def __float__(self) -> float:
        return float(sum(float(c) * math.sqrt(r) for r, c in self.terms))


def pay(b: Bundle) -> Surd:
    """Induced dollar payoff 2/5 (sqrt(apples) + sqrt(oranges))^2, exactly."""
    if len(b) != 2:
        raise ValueError("pay is defined for (apples, oranges) bundles")
    a, o = (Fraction(q) for q in b)
    if a < 0 or o < 0:
        raise ValueError("negative quantity")
    if a.denominator != 1 or o.denominator != 1:
        raise ValueError("pay takes whole apples and oranges")
    return (Surd.rational(a + o) + 2 * Surd.sqrt(a * o)) * Fraction(2, 5)


# --- utility models ------------------------------------------------------------

UTILITY_KINDS = ("induced_sqrt", "ces", "linear")


@dataclass(frozen=True)
class UtilityModel:
    """Utility over bundles.

    ``induced_sqrt`` is the Shopping payoff, ``ces`` is
    ``(sum_i x_i^r)^(1/r)`` with equal weights and ``linear`` is a weighted
    sum. :meth:`exact` gives a tie-exact value where one exists.
    """

    kind: str
    exponent: Fraction = Fraction(1, 2)
    weights: tuple[Fraction, ...] = (Fraction(1), Fraction(1))

    def __post_init__(self):
        if self.kind not in UTILITY_KINDS:
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.kind == "ces" and (self.exponent == 0 or self.exponent >= 1):
            raise ValueError("ces exponent must be nonzero and below 1")
        if self.kind == "linear" and any(w <= 0 for w in self.weights):
            raise ValueError("linear weights must be positive")

    @classmethod
    def induced(cls) -> "UtilityModel":
        return cls("induced_sqrt")

    @classmethod
    def ces(cls, r) -> "UtilityModel":
        return cls("ces", exponent=Fraction(r))

    @classmethod
    def linear(cls, *weights) -> "UtilityModel":
        return cls("linear", weights=tuple(Fraction(w) for w in (weights or (1, 1))))

    @property
    def symmetric(self) -> bool:
        return self.kind != "linear" or len(set(self.weights)) == 1

    def exact(self, b: Bundle):
        """Exact value (Surd or Fraction), or None when only floats are available."""
        if self.kind == "induced_sqrt":
            return pay(b)
        if self.kind == "linear":
            return sum((w * q for w, q in zip(self.weights, b)), Fraction(0))
        return None

    def value(self, b) -> float:
        x = np.asarray([float(q) for q in b])
        if self.kind == "induced_sqrt":
            return 0.4 * float(np.sum(np.sqrt(x))) ** 2
        if self.kind == "linear":
            return float(np.dot([float(w) for w in self.weights], x))
        r = float(self.exponent)
        if r < 0 and np.any(x <= 0):
            return 0.0
        return float(np.sum(x**r)) ** (1.0 / r)

    def gradient(self, b) -> np.ndarray:
        """Analytic gradient at an interior bundle."""
        x = np.asarray([float(q) for q in b])
        if np.any(x <= 0) and self.kind != "linear":
            raise ValueError("gradient is only defined at interior bundles")
        if self.kind == "linear":
            return np.array([float(w) for w in self.weights])
        r = 0.5 if self.kind == "induced_sqrt" else float(self.exponent)
        scale = 0.4 if self.kind == "induced_sqrt" else 1.0
        s = float(np.sum(x**r))
        return scale * s ** (1.0 / r - 1.0) * x ** (r - 1.0)


# --- model predictions ------------------------------------------------------------

MODEL_KINDS = ("narrow", "broad", "pnb")


def _argmax(items: Sequence, key: Callable, exact: bool) -> list:
    """All maximizers; float keys treat values within 1e-12 (relative) as ties."""
    vals = [key(it) for it in items]
    if exact:
        best = max(vals)
        return [it for it, v in zip(items, vals) if v == best]
    best = max(vals)
    tol = 1e-12 * abs(best)
    return [it for it, v in zip(items, vals) if best - v <= tol]


def ppe_criterion(model: UtilityModel, alpha, picks: Sequence[Bundle], exact: bool = True):
    """alpha * sum_k u(x^k) + (1 - alpha) * u(sum_k x^k)."""
    total = picks[0]
    for p in picks[1:]:
        total = add(total, p)
    if exact:
        a = Fraction(alpha)
        narrow = None
        for p in picks:
            v = model.exact(p)
            narrow = v if narrow is None else narrow + v
        return narrow * a + model.exact(total) * (1 - a)
    a = float(alpha)
    return a * sum(model.value(p) for p in picks) + (1 - a) * model.value(total)


def decision_argmax(decision: Decision, model: UtilityModel, bracketing: str, alpha=None) -> list[tuple[int, ...]]:
    """All optimal line-index tuples for one decision under a bracketing model."""
    sheets = [b.lines for b in decision.subdecisions]
    exact = model.exact(sheets[0][0]) is not None
    if bracketing == "narrow":
        per = [_argmax(range(len(s)), (lambda i, s=s: model.exact(s[i]) if exact else model.value(s[i])), exact) for s in sheets]
        return [tuple(c) for c in product(*per)]
    combos = list(product(*(range(len(s)) for s in sheets)))
    if bracketing == "broad":
        def key(c):
            tot = aggregate_choice(decision, [s[i] for s, i in zip(sheets, c)])
            return model.exact(tot) if exact else model.value(tot)
    elif bracketing == "pnb":
        if alpha is None or not 0 <= Fraction(alpha) <= 1:
            raise ValueError("pnb predictions need alpha in [0, 1]")

        def key(c):
            return ppe_criterion(model, alpha, [s[i] for s, i in zip(sheets, c)], exact)
    else:
        raise ValueError(f"unknown bracketing {bracketing!r}")
    return _argmax(combos, key, exact)


def point_predictions(
    design: ExperimentDesign, bracketing: str, alpha=None, model: UtilityModel | None = None
) -> dict[str, list[tuple[int, ...]]]:
    """Optimal line indices per decision; every maximizer is listed."""
    if model is None:
        if design.domain != "shopping":
            raise ValueError("point predictions use the induced payoff, which only the shopping design has")
        model = UtilityModel.induced()
    return {d.id: decision_argmax(d, model, bracketing, alpha) for d in design.decisions}


def unique_profile(pred: Mapping[str, list[tuple[int, ...]]]) -> dict[str, tuple[int, ...]]:
    out = {}
    for k, v in pred.items():
        if len(v) != 1:
            raise ValueError(f"decision {k} has {len(v)} optimal choices")
        out[k] = v[0]
    return out


# --- alpha ranges ----------------------------------------------------------------

RANGE_DECISIONS = ("D1", "D3")


@dataclass(frozen=True)
class AlphaRange:
    lower: Fraction
    upper: Fraction
    profile: tuple[tuple[str, tuple[int, ...]], ...]  # (decision id, line indices)
    alphas: tuple[Fraction, ...] = field(default=(), compare=False)

    def contains(self, alpha) -> bool:
        return self.lower <= Fraction(alpha) <= self.upper

    def label(self) -> str:
        return f"[{self.lower},{self.upper}]"


def alpha_ranges(
    design: ExperimentDesign,
    grid: Sequence | None = None,
    decisions: Sequence[str] = RANGE_DECISIONS,
    model: UtilityModel | None = None,
) -> list[AlphaRange]:
    """Group grid values of alpha by the PPE prediction profile on the given decisions.

    Ranges come back in increasing alpha. A grid point whose prediction is not
    unique raises, since it would make the grouping ambiguous.
    """
    from .pnb import alpha_grid

    grid = alpha_grid(100) if grid is None else sorted(Fraction(a) for a in grid)
    model = model or UtilityModel.induced()
    groups: list[tuple[tuple, list[Fraction]]] = []
    for a in grid:
        prof = tuple(
            (did, _only(decision_argmax(design.decision(did), model, "pnb", a), did, a)) for did in decisions
        )
        if groups and groups[-1][0] == prof:
            groups[-1][1].append(a)
        else:
            groups.append((prof, [a]))
    seen = set()
    for prof, _ in groups:
        if prof in seen:
            raise ValueError("a prediction profile recurs over non-adjacent alpha values")
        seen.add(prof)
    return [AlphaRange(al[0], al[-1], prof, tuple(al)) for prof, al in groups]


def _only(opts: list, did: str, a) -> tuple[int, ...]:
    if len(opts) != 1:
        raise ValueError(f"PPE prediction for {did} at alpha={a} is not unique: {opts}")
    return opts[0]


@dataclass(frozen=True)
class AlphaEstimate:
    range: AlphaRange
    errors: int
    tied_with: tuple[str, ...] = ()


def estimate_alpha(design: ExperimentDesign, choices: SubjectChoices, ranges: Sequence[AlphaRange]) -> AlphaEstimate:
    """Range whose prediction is closest in total line distance; ties go to the larger alpha."""
    if not ranges:
        raise ValueError("no alpha ranges to choose from")
    scored = []
    for r in ranges:
        err = 0
        for did, lines in r.profile:
            d = design.decision(did)
            err += sum(abs(choices.choices[k] - i) for k, i in zip(d.keys, lines))
        scored.append((err, r))
    best = min(e for e, _ in scored)
    winners = [r for e, r in scored if e == best]
    pick = max(winners, key=lambda r: r.upper)
    others = tuple(r.label() for r in winners if r is not pick)
    return AlphaEstimate(pick, best, others)


# --- identification from first-order conditions -------------------------------------


def alpha_from_foc(
    utility: UtilityModel,
    prices: Sequence[Sequence[float]],
    choices: Sequence[Sequence[float]],
    rtol: float = 1e-9,
):
    """Recover alpha from interior two-subdecision choices on linear budgets.

    Returns 0 for a corner choice, 1 when both narrow first-order conditions
    hold, and otherwise the ratio of marginal-utility-per-dollar differences
    (evaluated in the first subdecision whose narrow condition fails).
    """
    if len(prices) != 2 or len(choices) != 2:
        raise ValueError("alpha_from_foc needs exactly two subdecisions")
    p = [np.asarray(pk, dtype=float) for pk in prices]
    x = [np.asarray(xk, dtype=float) for xk in choices]
    if math.isclose(p[0][0] / p[0][1], p[1][0] / p[1][1], rel_tol=1e-12):
        raise ValueError("alpha is not identified when the price ratios coincide")
    if any(np.any(xk < 0) for xk in x):
        raise ValueError("negative quantities")
    if any(np.any(xk == 0) for xk in x):
        return 0
    agg = x[0] + x[1]
    G = utility.gradient(agg)
    values = []
    for k in range(2):
        N = utility.gradient(x[k]) / p[k]
        M = G / p[k]
        gap = N[1] - N[0]
        if abs(gap) <= rtol * max(abs(N[0]), abs(N[1])):
            values.append(None)
            continue
        num = M[0] - M[1]
        den = num + gap
        values.append(num / den)
    if all(v is None for v in values):
        return 1
    a = next(v for v in values if v is not None)
    if not 0 < a < 1:
        raise ValueError(f"first-order conditions imply alpha={a}, outside (0, 1); choices are not PNB-optimal")
    return a


def alpha_from_foc_per_subdecision(utility: UtilityModel, prices, choices) -> list[float | None]:
    """The closed-form alpha evaluated separately in each subdecision (None where undefined)."""
    p = [np.asarray(pk, dtype=float) for pk in prices]
    x = [np.asarray(xk, dtype=float) for xk in choices]
    G = utility.gradient(x[0] + x[1])
    out = []
    for k in range(2):
        N = utility.gradient(x[k]) / p[k]
        M = G / p[k]
        den = (M[0] - M[1]) + (N[1] - N[0])
        out.append(None if den == 0 else (M[0] - M[1]) / den)
    return out


def continuous_ppe_choice(
    utility: UtilityModel, alpha: float, prices: Sequence[Sequence[float]], incomes: Sequence[float]
) -> list[np.ndarray]:
    """Interior PPE optimum on continuous linear budgets, found by solving the first-order conditions."""
    from scipy.optimize import root

    p = [np.asarray(pk, dtype=float) for pk in prices]
    inc = [float(i) for i in incomes]

    def bundles(s):
        return [np.array([s[k] * inc[k] / p[k][0], (1 - s[k]) * inc[k] / p[k][1]]) for k in range(2)]

    def foc(s):
        xs = bundles(s)
        G = utility.gradient(xs[0] + xs[1])
        out = []
        for k in range(2):
            g = alpha * utility.gradient(xs[k]) + (1 - alpha) * G
            out.append(g[0] / p[k][0] - g[1] / p[k][1])
        return out

    def objective(s):
        xs = bundles(s)
        return alpha * (utility.value(xs[0]) + utility.value(xs[1])) + (1 - alpha) * utility.value(xs[0] + xs[1])

    # coarse grid search picks the basin, the first-order conditions polish it
    shares = np.linspace(0.01, 0.99, 99)
    start = max(((s1, s2) for s1 in shares for s2 in shares), key=objective)
    # solve in logit shares so every iterate stays interior
    expit = lambda z: 1.0 / (1.0 + np.exp(-np.clip(np.asarray(z), -30, 30)))
    z0 = [math.log(s / (1 - s)) for s in start]
    sol = root(lambda z: foc(expit(z)), z0, method="hybr", tol=1e-13)
    scale = max(abs(float(g)) for k in range(2) for g in utility.gradient(bundles(start)[k]) / p[k])
    if np.max(np.abs(foc(expit(sol.x)))) > 1e-10 * scale:
        raise ArithmeticError(f"no interior PPE optimum found (residual {np.max(np.abs(foc(expit(sol.x))))}, {sol.message})")
    return bundles(expit(sol.x))
