"""Command-line entry point: ``bracketlab <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path

from .model import BUILTIN_DOMAINS, ExperimentDesign, build_design

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INPUT = 4
EXIT_BUDGET = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def load_design(spec: str) -> ExperimentDesign:
    if spec in BUILTIN_DOMAINS:
        return build_design(spec)
    if spec.startswith("file:"):
        path = Path(spec[5:])
        try:
            text = path.read_text()
        except OSError as e:
            raise CliError(f"cannot read design {path}: {e.strerror}", EXIT_IO) from None
        try:
            return ExperimentDesign.from_dict(json.loads(text))
        except (ValueError, KeyError, TypeError) as e:
            raise CliError(f"invalid design file {path}: {e}", EXIT_INPUT) from None
    raise CliError(f"unknown design {spec!r}; use {', '.join(BUILTIN_DOMAINS)} or file:<path>", EXIT_INPUT)


def _read_subjects(args, design):
    from .dataio import InputError, read_choices

    if not args.input:
        raise CliError("--input is required", EXIT_USAGE)
    try:
        with open(args.input, newline="") as fh:
            return read_choices(fh, design, args.input)
    except OSError as e:
        raise CliError(f"cannot read {args.input}: {e.strerror}", EXIT_IO) from None
    except InputError as e:
        raise CliError(str(e), EXIT_INPUT) from None


def _emit(args, text: str) -> None:
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as e:
            raise CliError(f"cannot write {args.out}: {e.strerror}", EXIT_IO) from None
    else:
        sys.stdout.write(text)


def _pnb_config(args):
    from .pnb import PnbConfig

    return PnbConfig(
        alpha_steps=args.alpha_grid,
        mode=args.pnb_mode.replace("-", "_"),
        orientation=args.pnb_orientation,
        weighting=args.pnb_weighting,
        enrich=args.pnb_enrich,
    )


def _analysis_config(args):
    from .errors import TestOptions
    from .report import AnalysisConfig

    tests = tuple(args.tests.split(",")) if getattr(args, "tests", None) else None
    return AnalysisConfig(cap=args.errors_cap, opts=TestOptions(args.bbwarp_rule, _pnb_config(args)), tests=tests)


# --- commands -----------------------------------------------------------------------


def cmd_design(args) -> None:
    _emit(args, load_design(args.design).to_json() + "\n")


def cmd_validate(args) -> None:
    design = load_design(args.design)
    subjects = _read_subjects(args, design)
    _emit(args, f"{len(subjects)} subjects, {len(design.keys)} subdecisions each: ok\n")


def cmd_analyze(args, classify: bool = False) -> None:
    from .errors import get_test
    from .report import build_report, dumps

    design = load_design(args.design)
    subjects = _read_subjects(args, design)
    cfg = _analysis_config(args)
    try:
        for t in cfg.tests or ():
            get_test(t)
    except KeyError as e:
        raise CliError(str(e.args[0]), EXIT_INPUT) from None
    _emit(args, dumps(build_report(design, subjects, cfg, args.workers, classify)))


def cmd_areas(args) -> None:
    from .classify import AREA_MODELS, predictive_areas
    from .errors import TestOptions

    design = load_design(args.design)
    models = AREA_MODELS if args.model == "all" else (args.model,)
    if design.domain == "shopping":
        models = tuple(m for m in models if m != "pnb_sym")
    opts = TestOptions(args.bbwarp_rule, _pnb_config(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "errors", "count", "total", "share"])
    for m in models:
        res = predictive_areas(design, m, args.errors, opts, args.workers, use_cache=not args.no_cache)
        for e, c in enumerate(res.counts):
            if args.only and e != args.errors:
                continue
            w.writerow([m, e, c, res.total, f"{c / res.total:.3g}"])
    _emit(args, buf.getvalue())


def cmd_power(args) -> None:
    from .errors import TestOptions, get_test
    from .power import BudgetExceeded, exact_pass_probabilities, mc_pass_probability, default_tests, to_csv

    design = load_design(args.design)
    opts = TestOptions(args.bbwarp_rule, _pnb_config(args))
    tests = tuple(args.tests.split(",")) if args.tests else default_tests(design)
    try:
        for t in tests:
            get_test(t)
    except KeyError as e:
        raise CliError(str(e.args[0]), EXIT_INPUT) from None
    rows = []
    for t in tests:
        if args.method == "exact":
            try:
                rows.extend(exact_pass_probabilities(design, t, args.errors, opts, budget=args.budget, workers=args.workers))
            except BudgetExceeded as e:
                raise CliError(f"{e}; rerun with --method mc", EXIT_BUDGET) from None
        else:
            rows.extend(mc_pass_probability(design, t, e, args.samples, args.seed, opts, args.workers) for e in range(args.errors + 1))
    _emit(args, to_csv(rows))


def _bundle_json(b) -> list[str]:
    return [str(q) for q in b]


def cmd_predict(args) -> None:
    from .induced import point_predictions

    design = load_design(args.design)
    if args.model == "pnb" and args.alpha is None:
        raise CliError("--alpha is required for pnb predictions", EXIT_USAGE)
    try:
        pred = point_predictions(design, args.model, None if args.alpha is None else Fraction(args.alpha))
    except ValueError as e:
        raise CliError(str(e), EXIT_INPUT) from None
    out = {}
    for d in design.decisions:
        out[d.id] = [
            {"lines": list(p), "bundles": [_bundle_json(b.lines[i]) for b, i in zip(d.subdecisions, p)]} for p in pred[d.id]
        ]
    _emit(args, json.dumps({"model": args.model, "alpha": args.alpha, "predictions": out}, sort_keys=True, indent=2) + "\n")


def cmd_estimate_alpha(args) -> None:
    from .induced import alpha_ranges, estimate_alpha
    from .pnb import alpha_grid

    design = load_design(args.design)
    if design.domain != "shopping":
        raise CliError("alpha estimation needs the shopping design", EXIT_INPUT)
    ranges = alpha_ranges(design, alpha_grid(args.alpha_grid))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.histogram or not args.input:
        counts = {r.label(): 0 for r in ranges}
        if args.input:
            for s in _read_subjects(args, design):
                counts[estimate_alpha(design, s, ranges).range.label()] += 1
        w.writerow(["range_lower", "range_upper", "subjects", "profile"])
        for r in ranges:
            prof = " ".join(f"{did}:{','.join(map(str, lines))}" for did, lines in r.profile)
            w.writerow([r.lower, r.upper, counts[r.label()], prof])
    else:
        w.writerow(["subject_id", "range_lower", "range_upper", "errors", "tied_with"])
        for s in _read_subjects(args, design):
            est = estimate_alpha(design, s, ranges)
            w.writerow([s.subject_id, est.range.lower, est.range.upper, est.errors, ";".join(est.tied_with)])
    _emit(args, buf.getvalue())


def cmd_simulate(args) -> None:
    from .dataio import write_choices
    from .simulate import Population

    design = load_design(args.design)
    if args.population:
        try:
            spec = json.loads(Path(args.population).read_text())
        except OSError as e:
            raise CliError(f"cannot read {args.population}: {e.strerror}", EXIT_IO) from None
        except json.JSONDecodeError as e:
            raise CliError(f"invalid population spec: {e}", EXIT_INPUT) from None
    else:
        util = {"kind": args.utility}
        if args.utility == "ces":
            util["exponent"] = args.exponent
        spec = {
            "seed": args.seed,
            "agents": [
                {"utility": util, "bracketing": args.bracketing, "alpha": args.alpha, "tremble": args.tremble, "count": args.count}
            ],
        }
    try:
        pop = Population.from_dict(spec)
        subjects = [s.choices for _, s in pop.subjects(design)]
    except (ValueError, KeyError) as e:
        raise CliError(f"invalid population spec: {e}", EXIT_INPUT) from None
    _emit(args, write_choices(subjects, design))


def payoff_table(max_apples: int, max_oranges: int) -> str:
    from .induced import pay

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["apples\\oranges"] + list(range(max_oranges + 1)))
    for a in range(max_apples + 1):
        row = [a]
        for o in range(max_oranges + 1):
            cents = Decimal(repr(float(pay((a, o))))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
            row.append(f"{cents:.2f}")
        w.writerow(row)
    return buf.getvalue()


def cmd_payoff_table(args) -> None:
    _emit(args, payoff_table(args.max_apples, args.max_oranges))


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bracketlab", description="Choice-bracketing revealed-preference toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, design=True):
        if design:
            sp.add_argument("--design", default="risk", help="risk, social, shopping or file:<path>")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--workers", type=int, default=1)

    def test_opts(sp):
        sp.add_argument("--errors-cap", type=int, default=3)
        sp.add_argument("--alpha-grid", type=int, default=100, help="alpha grid k/N")
        sp.add_argument("--pnb-mode", choices=("ppe", "per-subdecision"), default="ppe")
        sp.add_argument("--pnb-orientation", choices=("objective", "literal"), default="objective")
        sp.add_argument("--pnb-weighting", choices=("mean", "sum"), default="mean")
        sp.add_argument("--pnb-enrich", action="store_true", help="add every sheet line to the outcome grid")
        sp.add_argument("--bbwarp-rule", choices=("exact", "a-coordinate"), default="exact")

    sp = sub.add_parser("design", help="emit a design as JSON")
    common(sp)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("validate", help="check a choices CSV against a design")
    common(sp)
    sp.add_argument("--input", required=True)
    sp.set_defaults(func=cmd_validate)

    for name, cls in (("analyze", False), ("classify", True)):
        sp = sub.add_parser(name, help="test outcomes and error counts" + (" with Selten classification" if cls else ""))
        common(sp)
        test_opts(sp)
        sp.add_argument("--input", required=True)
        sp.add_argument("--tests", help="comma-separated test names (default: all that apply)")
        sp.set_defaults(func=lambda a, c=cls: cmd_analyze(a, c))

    sp = sub.add_parser("areas", help="predictive areas")
    common(sp)
    test_opts(sp)
    sp.add_argument("--model", choices=("narrow", "broad", "pnb", "pnb_sym", "all"), default="all")
    sp.add_argument("--errors", type=int, default=3, help="largest error allowance")
    sp.add_argument("--only", action="store_true", help="print only the --errors row")
    sp.add_argument("--no-cache", action="store_true")
    sp.set_defaults(func=cmd_areas)

    sp = sub.add_parser("power", help="pass probabilities under random choice")
    common(sp)
    test_opts(sp)
    sp.add_argument("--tests", help="comma-separated test names")
    sp.add_argument("--errors", type=int, default=2)
    sp.add_argument("--method", choices=("exact", "mc"), default="exact")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=10**8)
    sp.set_defaults(func=cmd_power)

    sp = sub.add_parser("predict", help="induced-payoff point predictions")
    common(sp)
    sp.set_defaults(design="shopping")
    sp.add_argument("--model", choices=("narrow", "broad", "pnb"), default="narrow")
    sp.add_argument("--alpha")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("estimate-alpha", help="alpha ranges and per-subject estimates")
    common(sp)
    sp.set_defaults(design="shopping")
    sp.add_argument("--input")
    sp.add_argument("--alpha-grid", type=int, default=100)
    sp.add_argument("--histogram", action="store_true", help="subject counts per range")
    sp.set_defaults(func=cmd_estimate_alpha)

    sp = sub.add_parser("simulate", help="simulated subjects as a choices CSV")
    common(sp)
    sp.add_argument("--population", help="JSON population spec")
    sp.add_argument("--utility", choices=("induced_sqrt", "ces", "linear"), default="ces")
    sp.add_argument("--exponent", default="1/2")
    sp.add_argument("--bracketing", choices=("narrow", "broad", "pnb"), default="narrow")
    sp.add_argument("--alpha")
    sp.add_argument("--tremble", type=float, default=0.0)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("payoff-table", help="induced payoff in dollars by apples and oranges")
    common(sp, design=False)
    sp.add_argument("--max-apples", type=int, default=20)
    sp.add_argument("--max-oranges", type=int, default=20)
    sp.set_defaults(func=cmd_payoff_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        args.func(args)
    except CliError as e:
        print(f"bracketlab: {e}", file=sys.stderr)
        return e.code
    except (ValueError, KeyError) as e:
        print(f"bracketlab: {e}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
