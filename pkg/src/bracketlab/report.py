"""Per-subject analysis and deterministic JSON reports."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

from .classify import (
    MODELS,
    UNCLASSIFIED_THRESHOLD,
    Classification,
    model_tests,
    predictive_areas,
    selten_classify,
    total_profiles,
)
from .errors import DEFAULT_CAP, TestOptions, applicable_tests, format_errors, min_errors_to_pass
from .model import ExperimentDesign, SubjectChoices
from .pnb import passing_alphas

REPORT_SCHEMA = "bracketlab-report/1"


@dataclass(frozen=True)
class AnalysisConfig:
    cap: int = DEFAULT_CAP
    opts: TestOptions = field(default_factory=TestOptions)
    threshold: int = UNCLASSIFIED_THRESHOLD
    tests: tuple[str, ...] | None = None  # None: every test that applies to the design
    models: tuple[str, ...] = MODELS

    def __post_init__(self):
        if self.cap < 0:
            raise ValueError("errors cap must be nonnegative")

    def to_dict(self) -> dict:
        p = self.opts.pnb
        return {
            "alpha_grid": f"k/{p.alpha_steps}",
            "bbwarp_rule": self.opts.bbwarp_rule,
            "errors_cap": self.cap,
            "pnb_mode": p.mode,
            "pnb_orientation": p.orientation,
            "pnb_symmetry": p.symmetry,
            "pnb_weighting": p.weighting,
            "tie_rules": {
                "estimate_alpha": "larger-alpha range",
                "selten": "fewer errors, then narrow > broad > pnb",
            },
            "unclassified_threshold": self.threshold,
        }


@lru_cache(maxsize=32)
def design_areas(design: ExperimentDesign, cfg: AnalysisConfig) -> dict[str, list[int]]:
    """Predictive-area counts at 0..cap for each model (lottery model read from the sidecar cache when present)."""
    return {m: predictive_areas(design, m, cfg.cap, cfg.opts).counts for m in cfg.models}


def _alpha_str(a: Fraction) -> str:
    return f"{a.numerator}/{a.denominator}" if a.denominator != 1 else str(a.numerator)


def _shopping_alpha(design: ExperimentDesign, choices: SubjectChoices, cfg: AnalysisConfig) -> dict:
    from .induced import estimate_alpha

    ranges = _ranges(design, cfg.opts.pnb.alpha_steps)
    est = estimate_alpha(design, choices, ranges)
    return {
        "errors": est.errors,
        "range": [_alpha_str(est.range.lower), _alpha_str(est.range.upper)],
        "tied_with": list(est.tied_with),
    }


@lru_cache(maxsize=8)
def _ranges(design: ExperimentDesign, steps: int):
    from .induced import alpha_ranges
    from .pnb import alpha_grid

    return alpha_ranges(design, alpha_grid(steps))


def classify_subject(
    design: ExperimentDesign,
    choices: SubjectChoices,
    cfg: AnalysisConfig = AnalysisConfig(),
    areas: Mapping[str, Sequence[int]] | None = None,
) -> Classification:
    areas = design_areas(design, cfg) if areas is None else areas
    tests = model_tests(design)
    errs = {m: min_errors_to_pass(design, choices, tests[m], cfg.cap, cfg.opts) for m in cfg.models}
    return selten_classify(errs, areas, total_profiles(design), cfg.threshold)


def analyze_subject(
    design: ExperimentDesign,
    choices: SubjectChoices,
    cfg: AnalysisConfig = AnalysisConfig(),
    areas: Mapping[str, Sequence[int]] | None = None,
    classify: bool = True,
) -> dict:
    """Everything the report records about one subject, as JSON-ready values."""
    choices.validate(design)
    names = cfg.tests if cfg.tests is not None else applicable_tests(design)
    errs = {n: min_errors_to_pass(design, choices, n, cfg.cap, cfg.opts) for n in names}
    out: dict = {
        "subject_id": choices.subject_id,
        "profile": list(choices.profile(design)),
        "tests": {n: e == 0 for n, e in errs.items()},
        "min_errors": {n: format_errors(e, cfg.cap) for n, e in errs.items()},
    }
    if design.domain == "shopping":
        out["alpha_range"] = _shopping_alpha(design, choices, cfg)
    elif "pnb" in names:
        out["pnb_alphas"] = [_alpha_str(a) for a in passing_alphas(design, choices, cfg.opts.pnb)]
    if classify:
        c = classify_subject(design, choices, cfg, areas)
        out["selten"] = {
            "assigned": c.label,
            "errors": {m: format_errors(e, cfg.cap) for m, e in c.errors.items()},
            "scores": {m: (None if s is None else f"{float(s):.9f}") for m, s in c.scores.items()},
            "ties": list(c.ties),
        }
    return out


def _analyze_job(args) -> dict:
    design, choices, cfg, areas, classify = args
    return analyze_subject(design, choices, cfg, areas, classify)


def build_report(
    design: ExperimentDesign,
    subjects: Sequence[SubjectChoices],
    cfg: AnalysisConfig = AnalysisConfig(),
    workers: int = 1,
    classify: bool = True,
) -> dict:
    areas = design_areas(design, cfg) if classify else None
    jobs = [(design, s, cfg, areas, classify) for s in sorted(subjects, key=lambda s: s.subject_id)]
    if workers <= 1 or len(jobs) <= 1:
        rows = [_analyze_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_analyze_job, jobs))
    report = {
        "schema": REPORT_SCHEMA,
        "design": {"domain": design.domain, "hash": design.hash},
        "config": cfg.to_dict(),
        "subjects": rows,
    }
    if classify:
        report["areas"] = {m: list(v) for m, v in sorted(areas.items())}
        report["total_profiles"] = total_profiles(design)
        tally: dict[str, int] = {}
        for r in rows:
            lab = r["selten"]["assigned"]
            tally[lab] = tally.get(lab, 0) + 1
        report["assignments"] = dict(sorted(tally.items()))
    return report


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
