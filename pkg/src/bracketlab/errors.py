"""Line-distance errors and the minimal-perturbation search over named tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Sequence

from .model import DiscreteBudget, ExperimentDesign, SubjectChoices, SubKey
from .pnb import PnbConfig, pnb_witness
from .revpref import (
    BBWARP_RULES,
    PLAIN,
    SYMMETRIC,
    Observation,
    bb_mon,
    bb_observation,
    bb_sym,
    bb_warp,
    build_bb_dataset,
    build_nb_dataset,
    nb_sym,
    nb_warp,
    pnb_sym,
    sarp_with,
)

DEFAULT_CAP = 3


def line_distance(budget: DiscreteBudget, line_i: int, line_j: int) -> int:
    """Number of decision-sheet lines between two choices on the same budget."""
    for i in (line_i, line_j):
        if not 0 <= i < budget.n_lines:
            raise IndexError(f"line {i} outside 0..{budget.n_lines - 1}")
    return abs(line_i - line_j)


def profile_distance(p: Sequence[int], q: Sequence[int]) -> int:
    """L1 line distance between two profiles, summed over subdecisions."""
    return sum(abs(a - b) for a, b in zip(p, q))


@dataclass(frozen=True)
class Perturbation:
    shifts: tuple[tuple[SubKey, int], ...]

    @property
    def cost(self) -> int:
        return sum(abs(o) for _, o in self.shifts)

    def apply(self, design: ExperimentDesign, choices: SubjectChoices) -> SubjectChoices:
        out = dict(choices.choices)
        for key, off in self.shifts:
            i = out[key] + off
            if not 0 <= i < design.budget(key).n_lines:
                raise IndexError(f"shift {off:+d} moves {key} off its sheet")
            out[key] = i
        return SubjectChoices(choices.subject_id, out)


def offsets(n: int, cost: int) -> Iterator[tuple[int, ...]]:
    """Every integer vector of length n with L1 norm ``cost``, in lexicographic order."""
    if n == 0:
        if cost == 0:
            yield ()
        return
    for first in range(-cost, cost + 1):
        for rest in offsets(n - 1, cost - abs(first)):
            yield (first,) + rest


# --- named tests -------------------------------------------------------------


@dataclass(frozen=True)
class TestOptions:
    """Options that change what a named test checks."""

    __test__ = False

    bbwarp_rule: str = "exact"
    pnb: PnbConfig = field(default_factory=PnbConfig)

    def __post_init__(self):
        if self.bbwarp_rule not in BBWARP_RULES:
            raise ValueError(f"unknown BB-WARP rule {self.bbwarp_rule!r}")


Predicate = Callable[[ExperimentDesign, SubjectChoices, TestOptions], bool]


@dataclass(frozen=True)
class NamedTest:
    """A pass/fail prediction together with the subdecisions it reads."""

    __test__ = False

    name: str
    keys: Callable[[ExperimentDesign], tuple[SubKey, ...]]
    predicate: Predicate
    description: str = ""


def _all_keys(design: ExperimentDesign) -> tuple[SubKey, ...]:
    return design.keys


def _decision_keys(*ids: str):
    def keys(design: ExperimentDesign) -> tuple[SubKey, ...]:
        return tuple(k for did in ids for k in design.decision(did).keys)

    return keys


def _sub_keys(*keys: SubKey):
    def f(design: ExperimentDesign) -> tuple[SubKey, ...]:
        for k in keys:
            design.budget(k)
        return tuple(keys)

    return f


def _sheet_obs(design: ExperimentDesign, choices: SubjectChoices, key: SubKey) -> Observation:
    b = design.budget(key)
    return Observation(b.lines[choices.choices[key]], b.lines, f"D{key[0][1:]}.{key[1]}")


def _lines(design: ExperimentDesign, choices: SubjectChoices, did: str) -> list[int]:
    return [choices.choices[k] for k in design.decision(did).keys]


def _nb_warp_pair(a: SubKey, b: SubKey) -> Predicate:
    def pred(design, choices, opts):
        return nb_warp(_sheet_obs(design, choices, a), _sheet_obs(design, choices, b)).passed

    return pred


NB_WARP_PAIRS = {
    "nb_warp.d11_d5": (("D1", 1), ("D5", 1)),
    "nb_warp.d12_d4": (("D1", 2), ("D4", 1)),
    "nb_warp.d32_d5": (("D3", 2), ("D5", 1)),
    "nb_warp.d11_d32": (("D1", 1), ("D3", 2)),
}


def _nb_warp_all(design, choices, opts):
    return all(_nb_warp_pair(a, b)(design, choices, opts) for a, b in NB_WARP_PAIRS.values())


def _bb_warp(design, choices, opts):
    return bb_warp(
        design.decision("D1"),
        design.decision("D2"),
        _lines(design, choices, "D1"),
        choices.choices[("D2", 1)],
        opts.bbwarp_rule,
    ).passed


def _bb_mon(*ids: str) -> Predicate:
    def pred(design, choices, opts):
        return all(bb_mon(design.decision(d), _lines(design, choices, d)).passed for d in ids)

    return pred


def _sym(fn, *ids: str) -> Predicate:
    def pred(design, choices, opts):
        return all(fn(design.decision(d), _lines(design, choices, d)).passed for d in ids)

    return pred


def _nb_sarp(design, choices, opts):
    return sarp_with(build_nb_dataset(design, choices), SYMMETRIC).passed


def _bb_sarp(design, choices, opts):
    return sarp_with(build_bb_dataset(design, choices), SYMMETRIC).passed


def _nb_sarp_plain(design, choices, opts):
    return sarp_with(build_nb_dataset(design, choices), PLAIN).passed


def _bb_sarp_plain(design, choices, opts):
    return sarp_with(build_bb_dataset(design, choices), PLAIN).passed


def _pnb(design, choices, opts):
    return pnb_witness(design, choices, opts.pnb) is not None


def _induced(bracketing: str) -> Predicate:
    def pred(design, choices, opts):
        return induced_distance(design, choices.profile(design), bracketing, opts) == 0

    return pred


TESTS: dict[str, NamedTest] = {}


def register(test: NamedTest) -> NamedTest:
    if test.name in TESTS:
        raise ValueError(f"test {test.name!r} is already registered")
    TESTS[test.name] = test
    return test


for _name, (_a, _b) in NB_WARP_PAIRS.items():
    register(NamedTest(_name, _sub_keys(_a, _b), _nb_warp_pair(_a, _b), "identical budgets get identical choices"))
register(
    NamedTest(
        "nb_warp.all",
        _sub_keys(("D1", 1), ("D1", 2), ("D3", 2), ("D4", 1), ("D5", 1)),
        _nb_warp_all,
        "every identical-budget pair agrees",
    )
)
register(NamedTest("bb_warp.d1_d2", _decision_keys("D1", "D2"), _bb_warp, "D1 final bundle matches an attainable D2 choice"))
register(NamedTest("bb_mon.d1", _decision_keys("D1"), _bb_mon("D1"), "D1 final bundle is undominated"))
register(NamedTest("bb_mon.d3", _decision_keys("D3"), _bb_mon("D3"), "D3 final bundle is undominated"))
register(NamedTest("bb_mon.both", _decision_keys("D1", "D3"), _bb_mon("D1", "D3"), "both final bundles are undominated"))
for _fname, _fn in (("nb_sym", nb_sym), ("bb_sym", bb_sym), ("pnb_sym", pnb_sym)):
    register(NamedTest(f"{_fname}.d1", _decision_keys("D1"), _sym(_fn, "D1")))
    register(NamedTest(f"{_fname}.d3", _decision_keys("D3"), _sym(_fn, "D3")))
    register(NamedTest(f"{_fname}.both", _decision_keys("D1", "D3"), _sym(_fn, "D1", "D3")))
register(NamedTest("nb_sarp", _all_keys, _nb_sarp, "symmetric SARP on the narrow dataset"))
register(NamedTest("bb_sarp", _all_keys, _bb_sarp, "symmetric SARP on the broad dataset"))
register(NamedTest("nb_sarp.plain", _all_keys, _nb_sarp_plain, "SARP on the narrow dataset without symmetry"))
register(NamedTest("bb_sarp.plain", _all_keys, _bb_sarp_plain, "SARP on the broad dataset without symmetry"))
register(NamedTest("pnb", _all_keys, _pnb, "lottery test passes at some grid alpha"))
register(NamedTest("induced.narrow", _all_keys, _induced("narrow"), "equals the narrow point prediction"))
register(NamedTest("induced.broad", _all_keys, _induced("broad"), "equals the broad point prediction"))
register(NamedTest("induced.pnb", _all_keys, _induced("pnb"), "equals the PPE prediction at some grid alpha"))

RISK_TESTS = tuple(n for n in TESTS if not n.startswith("induced."))
SHOPPING_TESTS = ("induced.narrow", "induced.broad", "induced.pnb")


def get_test(name: str) -> NamedTest:
    try:
        return TESTS[name]
    except KeyError:
        raise KeyError(f"unknown test {name!r}; known: {', '.join(sorted(TESTS))}") from None


def applicable_tests(design: ExperimentDesign) -> tuple[str, ...]:
    """Registered tests whose subdecisions exist in the design."""
    if design.domain == "shopping":
        return SHOPPING_TESTS
    out = []
    for name in RISK_TESTS:
        try:
            TESTS[name].keys(design)
        except KeyError:
            continue
        out.append(name)
    return tuple(out)


# --- induced-payoff point predictions as profile sets -------------------------------


@lru_cache(maxsize=64)
def predicted_profiles(design: ExperimentDesign, bracketing: str, alpha_steps: int = 100) -> frozenset:
    """Full line profiles the model predicts (pnb: the union over the alpha grid)."""
    from itertools import product

    from .induced import point_predictions
    from .pnb import alpha_grid

    if bracketing == "pnb":
        preds = [point_predictions(design, "pnb", a) for a in alpha_grid(alpha_steps)]
    else:
        preds = [point_predictions(design, bracketing)]
    out = set()
    for pred in preds:
        for combo in product(*(pred[d.id] for d in design.decisions)):
            out.add(tuple(i for part in combo for i in part))
    return frozenset(out)


def induced_distance(design: ExperimentDesign, profile: Sequence[int], bracketing: str, opts: TestOptions) -> int:
    return min(profile_distance(profile, p) for p in predicted_profiles(design, bracketing, opts.pnb.alpha_steps))


# --- minimal perturbation search -------------------------------------------------------


@lru_cache(maxsize=1_000_000)
def _passes(name: str, design: ExperimentDesign, keys: tuple[SubKey, ...], sub: tuple[int, ...], opts: TestOptions) -> bool:
    # predicates read only their own subdecisions, so the cache is shared across subjects
    return TESTS[name].predicate(design, SubjectChoices("", dict(zip(keys, sub))), opts)


def min_errors_to_pass(
    design: ExperimentDesign,
    choices: SubjectChoices,
    test: str,
    cap: int = DEFAULT_CAP,
    opts: TestOptions = TestOptions(),
) -> int | None:
    """Fewest line shifts after which the choices pass ``test``; None when more than ``cap`` are needed.

    Shifts are explored in increasing total cost and, within a cost, in
    lexicographic order of the offset vector over the test's subdecisions.
    """
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    t = get_test(test)
    choices.validate(design)
    if test.startswith("induced."):
        d = induced_distance(design, choices.profile(design), test.split(".", 1)[1], opts)
        return d if d <= cap else None
    keys = t.keys(design)
    start = tuple(choices.choices[k] for k in keys)
    limits = tuple(design.budget(k).n_lines for k in keys)
    for cost in range(cap + 1):
        for off in offsets(len(keys), cost):
            sub = tuple(s + o for s, o in zip(start, off))
            if all(0 <= v < n for v, n in zip(sub, limits)) and _passes(test, design, keys, sub, opts):
                return cost
    return None


def min_errors_all(
    design: ExperimentDesign,
    choices: SubjectChoices,
    tests: Sequence[str] | None = None,
    cap: int = DEFAULT_CAP,
    opts: TestOptions = TestOptions(),
) -> dict[str, int | None]:
    tests = applicable_tests(design) if tests is None else tests
    return {name: min_errors_to_pass(design, choices, name, cap, opts) for name in tests}


def format_errors(value: int | None, cap: int) -> str | int:
    return value if value is not None else f">{cap}"


def passes(design: ExperimentDesign, choices: SubjectChoices, test: str, opts: TestOptions = TestOptions()) -> bool:
    return min_errors_to_pass(design, choices, test, 0, opts) == 0


def run_tests(
    design: ExperimentDesign, choices: SubjectChoices, tests: Sequence[str] | None = None, opts: TestOptions = TestOptions()
) -> Mapping[str, bool]:
    tests = applicable_tests(design) if tests is None else tests
    return {name: passes(design, choices, name, opts) for name in tests}
