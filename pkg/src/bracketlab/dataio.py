"""Choice CSV ingestion and emission."""

from __future__ import annotations

import csv
import io
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

from .model import ExperimentDesign, SubjectChoices

CHOICE_COLUMNS = ("subject_id", "experiment", "decision", "subdecision", "line_index", "qty_a", "qty_b")
OPTIONAL_COLUMNS = ("qty_a", "qty_b", "order")


class InputError(ValueError):
    """Malformed or inconsistent input data."""


def _parse_qty(text: str, where: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise InputError(f"{where}: cannot parse quantity {text!r}") from None


def read_choices(stream: TextIO, design: ExperimentDesign, source: str = "<input>") -> list[SubjectChoices]:
    """Parse choice rows, cross-check optional quantities and validate every subject.

    Rows may come in any order; subjects are returned sorted by id. The
    ``order`` column (presentation order) is accepted and ignored.
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise InputError(f"{source}: empty file")
    header = [h.strip() for h in reader.fieldnames]
    required = [c for c in CHOICE_COLUMNS if c not in OPTIONAL_COLUMNS]
    missing = [c for c in required if c not in header]
    if missing:
        raise InputError(f"{source}: missing columns {missing}")
    unknown = [h for h in header if h not in CHOICE_COLUMNS and h not in OPTIONAL_COLUMNS]
    if unknown:
        raise InputError(f"{source}: unknown columns {unknown}")
    subjects: dict[str, dict] = {}
    for lineno, raw in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        where = f"{source}:{lineno}"
        if None in raw:
            raise InputError(f"{where}: too many fields")
        sid = row["subject_id"]
        if not sid:
            raise InputError(f"{where}: empty subject_id")
        exp = row["experiment"]
        if exp and design.domain not in ("custom",) and exp != design.domain:
            raise InputError(f"{where}: experiment {exp!r} does not match the {design.domain} design")
        try:
            key = (row["decision"], int(row["subdecision"]))
            line = int(row["line_index"])
        except ValueError:
            raise InputError(f"{where}: subdecision and line_index must be integers") from None
        try:
            budget = design.budget(key)
        except KeyError:
            raise InputError(f"{where}: no subdecision {key[0]}.{key[1]} in the design") from None
        if not 0 <= line < budget.n_lines:
            raise InputError(f"{where}: line {line} outside 0..{budget.n_lines - 1} for {key[0]}.{key[1]}")
        b = budget.lines[line]
        for col, g in (("qty_a", 0), ("qty_b", 1)):
            if row.get(col):
                q = _parse_qty(row[col], where)
                if q != b[g]:
                    raise InputError(f"{where}: {col}={row[col]} but line {line} holds {b[g]}")
        ch = subjects.setdefault(sid, {})
        if key in ch:
            raise InputError(f"{where}: duplicate choice for subject {sid} in {key[0]}.{key[1]}")
        ch[key] = line
    out = []
    for sid in sorted(subjects):
        sc = SubjectChoices(sid, subjects[sid])
        try:
            sc.validate(design)
        except ValueError as e:
            raise InputError(f"{source}: {e}") from None
        out.append(sc)
    return out


def _fmt(q: Fraction) -> str:
    """Exact decimal when the denominator allows one, otherwise n/d."""
    d = q.denominator
    for k in range(7):
        if (10**k) % d == 0:
            if k == 0:
                return str(q.numerator)
            n = q.numerator * (10**k // d)
            sign = "-" if n < 0 else ""
            whole, frac = divmod(abs(n), 10**k)
            return f"{sign}{whole}.{frac:0{k}d}".rstrip("0")
    return f"{q.numerator}/{q.denominator}"


def write_choices(subjects: Iterable[SubjectChoices], design: ExperimentDesign) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CHOICE_COLUMNS)
    for s in sorted(subjects, key=lambda s: s.subject_id):
        for key in design.keys:
            i = s.choices[key]
            b = design.budget(key).lines[i]
            w.writerow([s.subject_id, design.domain, key[0], key[1], i, _fmt(b[0]), _fmt(b[1])])
    return buf.getvalue()


def read_choices_text(text: str, design: ExperimentDesign, source: str = "<input>") -> list[SubjectChoices]:
    return read_choices(io.StringIO(text), design, source)


def profiles_to_subjects(design: ExperimentDesign, profiles: Sequence[Sequence[int]], prefix: str = "s") -> list[SubjectChoices]:
    return [SubjectChoices.from_profile(design, p, f"{prefix}{n + 1:04d}") for n, p in enumerate(profiles)]
