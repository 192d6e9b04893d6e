"""Pass probabilities of the named tests under uniformly random line choices."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .classify import consistent_set, dilation_counts
from .errors import DEFAULT_CAP, TESTS, TestOptions, _passes, get_test, min_errors_to_pass
from .model import ExperimentDesign, SubjectChoices

DEFAULT_BUDGET = 10**8
# profiles a test without a pruned enumerator may evaluate one by one
DIRECT_BUDGET = 2 * 10**6
MC_CHUNK = 2_000

# full-profile tests whose zero-error sets come from a pruned enumeration
_ZERO_SETS = {"nb_sarp": "narrow", "bb_sarp": "broad", "pnb": "pnb", "induced.narrow": "narrow", "induced.broad": "broad", "induced.pnb": "pnb"}

TABLE_WARP = (
    "nb_warp.d11_d5",
    "nb_warp.d12_d4",
    "nb_warp.d32_d5",
    "nb_warp.d11_d32",
    "nb_warp.all",
    "bb_warp.d1_d2",
    "bb_mon.d1",
    "bb_mon.d3",
    "bb_mon.both",
)
TABLE_FULL = ("nb_sarp", "bb_sarp", "pnb")
TABLE_SYM = ("nb_sym.d1", "bb_sym.d1", "pnb_sym.d1", "nb_sym.d3", "bb_sym.d3", "pnb_sym.d3")


class BudgetExceeded(RuntimeError):
    """Exact enumeration would visit more profiles than allowed."""


@dataclass(frozen=True)
class PowerResult:
    test: str
    errors: int
    method: str  # "exact" or "mc"
    probability: Fraction | float
    std_error: float = 0.0
    samples: int = 0
    seed: int | None = None
    hits: int = 0

    @property
    def value(self) -> float:
        return float(self.probability)


def _zero_set(design: ExperimentDesign, test: str, opts: TestOptions, budget: int, direct_budget: int, workers: int):
    keys = get_test(test).keys(design)
    shape = tuple(design.budget(k).n_lines for k in keys)
    size = math.prod(shape)
    if size > budget:
        raise BudgetExceeded(f"{test} touches {size} profiles, above the budget of {budget}")
    if test in _ZERO_SETS and keys == design.keys:
        return shape, consistent_set(design, _ZERO_SETS[test], opts, workers)
    if size > direct_budget:
        raise BudgetExceeded(f"{test} has no pruned enumerator and touches {size} profiles")
    pts = [sub for sub in product(*(range(n) for n in shape)) if _passes(test, design, keys, sub, opts)]
    return shape, pts


def exact_pass_probabilities(
    design: ExperimentDesign,
    test: str,
    max_errors: int = DEFAULT_CAP,
    opts: TestOptions = TestOptions(),
    budget: int = DEFAULT_BUDGET,
    direct_budget: int = DIRECT_BUDGET,
    workers: int = 1,
) -> list[PowerResult]:
    """Exact probabilities for 0..max_errors.

    A profile passes within e errors iff it lies within L1 line distance e of
    the zero-error set on the test's subdecisions, so the counts come from
    growing that set on the restricted grid.
    """
    shape, pts = _zero_set(design, test, opts, budget, direct_budget, workers)
    total = math.prod(shape)
    counts = dilation_counts(shape, pts, max_errors)
    return [PowerResult(test, e, "exact", Fraction(c, total), hits=c, samples=total) for e, c in enumerate(counts)]


def exact_pass_probability(design: ExperimentDesign, test: str, errors: int, opts: TestOptions = TestOptions(), **kw) -> PowerResult:
    return exact_pass_probabilities(design, test, errors, opts, **kw)[errors]


def _mc_chunk(args) -> int:
    design, test, errors, opts, seed_seq, n = args
    rng = np.random.default_rng(seed_seq)
    draws = np.column_stack([rng.integers(0, c, size=n) for c in design.line_counts])
    hits = 0
    for row in draws:
        ch = SubjectChoices.from_profile(design, row)
        if min_errors_to_pass(design, ch, test, errors, opts) is not None:
            hits += 1
    return hits


def mc_pass_probability(
    design: ExperimentDesign,
    test: str,
    errors: int,
    samples: int,
    seed: int,
    opts: TestOptions = TestOptions(),
    workers: int = 1,
) -> PowerResult:
    """Monte Carlo pass frequency with its binomial standard error.

    Samples are drawn in fixed-size chunks, each from its own child of
    ``SeedSequence(seed)``, so the estimate does not depend on ``workers``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if errors < 0:
        raise ValueError("errors must be nonnegative")
    get_test(test)
    n_chunks = math.ceil(samples / MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(MC_CHUNK, samples - i * MC_CHUNK) for i in range(n_chunks)]
    jobs = [(design, test, errors, opts, c, n) for c, n in zip(children, sizes)]
    if workers <= 1:
        hits = sum(map(_mc_chunk, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            hits = sum(ex.map(_mc_chunk, jobs))
    p = hits / samples
    se = math.sqrt(p * (1 - p) / samples)
    return PowerResult(test, errors, "mc", p, se, samples, seed, hits)


def power_table(
    design: ExperimentDesign,
    tests: Sequence[str],
    max_errors: int = 2,
    method: str = "exact",
    samples: int = 10_000,
    seed: int = 0,
    opts: TestOptions = TestOptions(),
    workers: int = 1,
) -> list[PowerResult]:
    """Rows for every (test, errors) cell; exact enumeration falls back to Monte Carlo over budget."""
    if method not in ("exact", "mc"):
        raise ValueError(f"unknown method {method!r}")
    out: list[PowerResult] = []
    for test in tests:
        if method == "exact":
            try:
                out.extend(exact_pass_probabilities(design, test, max_errors, opts, workers=workers))
                continue
            except BudgetExceeded:
                pass
        out.extend(mc_pass_probability(design, test, e, samples, seed, opts, workers) for e in range(max_errors + 1))
    return out


def to_csv(rows: Sequence[PowerResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["test", "errors", "method", "probability", "fraction", "std_error", "samples", "seed"])
    for r in rows:
        frac = f"{r.probability.numerator}/{r.probability.denominator}" if isinstance(r.probability, Fraction) else ""
        w.writerow(
            [r.test, r.errors, r.method, f"{float(r.probability):.6g}", frac, f"{r.std_error:.3g}", r.samples, "" if r.seed is None else r.seed]
        )
    return buf.getvalue()


def default_tests(design: ExperimentDesign) -> tuple[str, ...]:
    if design.domain == "shopping":
        return ("induced.narrow", "induced.broad", "induced.pnb")
    return tuple(t for t in TABLE_WARP + TABLE_SYM + TABLE_FULL if t in TESTS)
