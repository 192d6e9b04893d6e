"""Predictive areas, Selten-score classification and the secondary statistics."""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DEFAULT_CAP, TestOptions, predicted_profiles
from .model import ExperimentDesign, SubjectChoices
from .pnb import PnbConfig, _passes_cached, decision_alphas
from .revpref import SYMMETRIC, Observation, bb_observation, pnb_sym, sarp_with, single_observation_ok

MODELS = ("narrow", "broad", "pnb")
AREA_MODELS = MODELS + ("pnb_sym",)
MODEL_TESTS = {"narrow": "nb_sarp", "broad": "bb_sarp", "pnb": "pnb"}
SHOPPING_TESTS = {"narrow": "induced.narrow", "broad": "induced.broad", "pnb": "induced.pnb"}
UNCLASSIFIED_THRESHOLD = 1_000_000
MODEL_PRIORITY = {m: i for i, m in enumerate(MODELS)}


def total_profiles(design: ExperimentDesign) -> int:
    return math.prod(design.line_counts)


def model_tests(design: ExperimentDesign) -> dict[str, str]:
    """Named test behind each bracketing model for this design."""
    return dict(SHOPPING_TESTS if design.domain == "shopping" else MODEL_TESTS)


# --- zero-error consistent sets ---------------------------------------------------


def _sheet_ok(design: ExperimentDesign) -> list[list[int]]:
    """Lines of each subdecision that a symmetric convex preference could choose on their own."""
    out = []
    for k in design.keys:
        b = design.budget(k)
        out.append([i for i in range(b.n_lines) if single_observation_ok(Observation(b.lines[i], b.lines), SYMMETRIC)])
    return out


def _decision_ok(design: ExperimentDesign) -> list[list[tuple[int, ...]]]:
    out = []
    for d in design.decisions:
        combos = product(*(range(b.n_lines) for b in d.subdecisions))
        out.append([c for c in combos if single_observation_ok(bb_observation(d, c), SYMMETRIC)])
    return out


def _flatten(parts) -> tuple[int, ...]:
    return tuple(i for p in parts for i in p)


def narrow_set(design: ExperimentDesign) -> list[tuple[int, ...]]:
    from .revpref import build_nb_dataset

    out = []
    for prof in product(*_sheet_ok(design)):
        if sarp_with(build_nb_dataset(design, SubjectChoices.from_profile(design, prof)), SYMMETRIC).passed:
            out.append(prof)
    return out


def broad_set(design: ExperimentDesign) -> list[tuple[int, ...]]:
    from .revpref import build_bb_dataset

    out = []
    for parts in product(*_decision_ok(design)):
        prof = _flatten(parts)
        if sarp_with(build_bb_dataset(design, SubjectChoices.from_profile(design, prof)), SYMMETRIC).passed:
            out.append(prof)
    return out


def pnb_sym_set(design: ExperimentDesign) -> list[tuple[int, ...]]:
    """Profiles passing the closed-form symmetric PNB conditions in every multi-subdecision decision.

    One-subdecision decisions only need a choice a symmetric convex
    preference could make on that sheet.
    """
    per = []
    for d, ok in zip(design.decisions, _decision_ok(design)):
        if len(d.subdecisions) == 1:
            per.append(ok)
        else:
            per.append([c for c in product(*(range(b.n_lines) for b in d.subdecisions)) if pnb_sym(d, c).passed])
    return [_flatten(parts) for parts in product(*per)]


def _pnb_chunk(args) -> list[tuple[int, ...]]:
    design, cfg, chunk = args
    return [p for p in chunk if _passes_cached(design, p, cfg) is not None]


def pnb_candidates(design: ExperimentDesign, cfg: PnbConfig) -> list[tuple[int, ...]]:
    """Profiles whose per-decision alpha sets intersect; the lottery test can only pass these."""
    per = []
    for d in design.decisions:
        opts = {}
        for c in product(*(range(b.n_lines) for b in d.subdecisions)):
            a = decision_alphas(design, d.id, c, cfg)
            if a:
                opts[c] = a
        per.append(sorted(opts.items()))
    out = []
    for combo in product(*per):
        common = frozenset.intersection(*(a for _, a in combo))
        if common:
            out.append(_flatten(c for c, _ in combo))
    return out


def pnb_set(design: ExperimentDesign, cfg: PnbConfig = PnbConfig(), workers: int = 1) -> list[tuple[int, ...]]:
    cands = pnb_candidates(design, cfg)
    if workers <= 1:
        return _pnb_chunk((design, cfg, cands))
    size = max(1, math.ceil(len(cands) / (workers * 8)))
    chunks = [(design, cfg, cands[i : i + size]) for i in range(0, len(cands), size)]
    out: list[tuple[int, ...]] = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(_pnb_chunk, chunks):
            out.extend(part)
    return out


def consistent_set(
    design: ExperimentDesign, model: str, opts: TestOptions = TestOptions(), workers: int = 1
) -> list[tuple[int, ...]]:
    """Sorted profiles consistent with the model at zero errors."""
    if model not in AREA_MODELS:
        raise ValueError(f"unknown model {model!r}")
    if design.domain == "shopping":
        if model == "pnb_sym":
            raise ValueError("the closed-form symmetric PNB conditions need a design without induced payoffs")
        return sorted(predicted_profiles(design, model, opts.pnb.alpha_steps))
    if model == "narrow":
        pts = narrow_set(design)
    elif model == "broad":
        pts = broad_set(design)
    elif model == "pnb_sym":
        pts = pnb_sym_set(design)
    else:
        pts = pnb_set(design, opts.pnb, workers)
    return sorted(pts)


# --- counting within an error allowance -----------------------------------------------


def dilation_counts(shape: Sequence[int], points: Sequence[Sequence[int]], errors: int) -> list[int]:
    """Number of grid profiles within L1 distance e of the point set, for e = 0..errors.

    Each round marks every neighbour one line away along one axis, so after e
    rounds the mask holds exactly the profiles within distance e.
    """
    mask = np.zeros(tuple(shape), dtype=bool)
    if len(points):
        idx = np.asarray(points, dtype=np.int64)
        mask[tuple(idx.T)] = True
    counts = [int(mask.sum())]
    nd = len(shape)
    for _ in range(errors):
        grown = mask.copy()
        for ax in range(nd):
            hi = [slice(None)] * nd
            lo = [slice(None)] * nd
            hi[ax] = slice(1, None)
            lo[ax] = slice(None, -1)
            grown[tuple(hi)] |= mask[tuple(lo)]
            grown[tuple(lo)] |= mask[tuple(hi)]
        mask = grown
        counts.append(int(mask.sum()))
    return counts


@dataclass(frozen=True)
class PredictiveArea:
    model: str
    errors: int
    count: int
    total: int

    @property
    def share(self) -> Fraction:
        return Fraction(self.count, self.total)

    @property
    def predictive_success(self) -> Fraction:
        return 1 - self.share


def _cache_dir() -> Path:
    return Path(os.environ.get("BRACKETLAB_CACHE", Path.home() / ".cache" / "bracketlab"))


def _config_hash(model: str, opts: TestOptions) -> str:
    # only the lottery test depends on the alpha grid and lottery options
    key = opts.pnb.key() if model == "pnb" else model
    return hashlib.sha256(key.encode()).hexdigest()[:12]


def cache_path(design: ExperimentDesign, model: str, opts: TestOptions) -> Path:
    return _cache_dir() / f"{design.hash}-{model}-{_config_hash(model, opts)}.npz"


@dataclass
class AreaResult:
    model: str
    counts: list[int]
    total: int
    zero_set_size: int
    from_cache: bool = False
    points: np.ndarray | None = field(default=None, repr=False)

    def area(self, errors: int) -> PredictiveArea:
        return PredictiveArea(self.model, errors, self.counts[errors], self.total)


def predictive_areas(
    design: ExperimentDesign,
    model: str,
    max_errors: int = DEFAULT_CAP,
    opts: TestOptions = TestOptions(),
    workers: int = 1,
    use_cache: bool = True,
) -> AreaResult:
    """Counts of profiles within 0..max_errors lines of the model's zero-error set.

    The lottery model's zero-error set is expensive, so it is stored in a
    binary sidecar keyed by design hash, model and option hash.
    """
    if max_errors < 0:
        raise ValueError("errors must be nonnegative")
    path = cache_path(design, model, opts)
    # only the lottery test is slow enough to be worth a sidecar
    use_cache = use_cache and model == "pnb" and design.domain != "shopping"
    pts = None
    cached = False
    if use_cache and path.exists():
        with np.load(path) as z:
            pts = z["points"]
        cached = True
    if pts is None:
        pts = np.asarray(consistent_set(design, model, opts, workers), dtype=np.int64).reshape(-1, len(design.keys))
        if use_cache:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp.npz")
            np.savez_compressed(tmp, points=pts)
            os.replace(tmp, path)
    counts = dilation_counts(design.line_counts, pts, max_errors)
    return AreaResult(model, counts, total_profiles(design), len(pts), cached, pts)


def predictive_area(design: ExperimentDesign, model: str, errors: int, opts: TestOptions = TestOptions(), workers: int = 1) -> PredictiveArea:
    return predictive_areas(design, model, errors, opts, workers).area(errors)


# --- Selten classification --------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    assigned: str | None  # None when unclassified
    scores: Mapping[str, Fraction | None]  # predictive success at the subject's error level
    errors: Mapping[str, int | None]
    ties: tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return self.assigned or "unclassified"


def selten_classify(
    errors: Mapping[str, int | None],
    areas: Mapping[str, Sequence[int]],
    total: int,
    threshold: int = UNCLASSIFIED_THRESHOLD,
) -> Classification:
    """Assign the model with the highest predictive success at the subject's own error count.

    A model is eligible when its error count is within the computed range and
    its area at that count is at most ``threshold``; ties go to fewer errors,
    then narrow before broad before pnb.
    """
    scores: dict[str, Fraction | None] = {}
    eligible = []
    for m in MODELS:
        e = errors.get(m)
        counts = areas.get(m)
        if e is None or counts is None or e >= len(counts):
            scores[m] = None
            continue
        scores[m] = 1 - Fraction(counts[e], total)
        if counts[e] <= threshold:
            eligible.append(m)
    if not eligible:
        return Classification(None, scores, dict(errors))
    best = max(scores[m] for m in eligible)
    top = [m for m in eligible if scores[m] == best]
    top.sort(key=lambda m: (errors[m], MODEL_PRIORITY[m]))
    return Classification(top[0], scores, dict(errors), tuple(top[1:]))


# --- secondary statistics ------------------------------------------------------------------


@dataclass(frozen=True)
class SignTest:
    improved: int
    worsened: int
    ties: int
    p_value: float


@dataclass(frozen=True)
class PairedT:
    n: int
    statistic: float | None
    p_value: float | None
    note: str = ""


def sign_test(first: Sequence[float], second: Sequence[float]) -> SignTest:
    """Exact two-sided binomial test on paired error counts, ties dropped.

    ``improved`` counts pairs whose second value is lower (fewer errors).
    """
    from scipy.stats import binomtest

    if len(first) != len(second) or not first:
        raise ValueError("sign test needs two equal-length nonempty samples")
    diffs = [b - a for a, b in zip(first, second)]
    up = sum(d < 0 for d in diffs)
    down = sum(d > 0 for d in diffs)
    ties = len(diffs) - up - down
    if up + down == 0:
        return SignTest(0, 0, ties, 1.0)
    return SignTest(up, down, ties, float(binomtest(up, up + down, 0.5).pvalue))


def paired_t(first: Sequence[float], second: Sequence[float]) -> PairedT:
    from scipy.stats import ttest_rel

    if len(first) != len(second) or not first:
        raise ValueError("paired t-test needs two equal-length nonempty samples")
    diffs = np.asarray(second, dtype=float) - np.asarray(first, dtype=float)
    if len(diffs) < 2 or np.all(diffs == diffs[0]):
        return PairedT(len(diffs), None, None, "no-variance")
    res = ttest_rel(second, first)
    return PairedT(len(diffs), float(res.statistic), float(res.pvalue))


def fisher_exact_2x2(table: Sequence[Sequence[int]]) -> float:
    """Two-sided Fisher exact p-value for a 2x2 table."""
    from scipy.stats import fisher_exact

    t = np.asarray(table, dtype=np.int64)
    if t.shape != (2, 2) or np.any(t < 0):
        raise ValueError("need a 2x2 table of nonnegative counts")
    if t.sum() == 0:
        raise ValueError("empty table")
    return float(fisher_exact(t, alternative="two-sided").pvalue)


@dataclass(frozen=True)
class SecondaryStats:
    sign: SignTest | None
    paired: PairedT | None
    fisher: Mapping[str, float]


def secondary_stats(
    first_round: Sequence[float] | None = None,
    second_round: Sequence[float] | None = None,
    tables: Mapping[str, Sequence[Sequence[int]]] | None = None,
) -> SecondaryStats:
    """Learning statistics on paired error counts plus Fisher tests on 2x2 classification tables."""
    if first_round is None and not tables:
        raise ValueError("no data for secondary statistics")
    sign = paired = None
    if first_round is not None:
        if second_round is None:
            raise ValueError("paired statistics need both rounds")
        sign = sign_test(first_round, second_round)
        paired = paired_t(first_round, second_round)
    fisher = {k: fisher_exact_2x2(v) for k, v in sorted((tables or {}).items())}
    return SecondaryStats(sign, paired, fisher)
