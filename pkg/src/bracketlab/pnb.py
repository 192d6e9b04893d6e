"""Partial-narrow bracketing as an expected-utility test over ancillary lotteries.

Each decision (``ppe`` mode) or subdecision (``per_subdecision`` mode) becomes
a lottery choice: the chosen lottery mixes the narrow bundles and the final
bundle with weights set by alpha, and the menu holds every lottery obtained by
replacing those bundles with grid points below some feasible selection. The
data are alpha-PNB rationalizable iff an expected-utility index over the grid
ranks every chosen lottery strictly above the rest of its menu, which is a
linear feasibility problem decided exactly by :mod:`bracketlab.simplex`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .model import Bundle, Decision, ExperimentDesign, SubjectChoices, add, aggregate_choice
from .simplex import phase1

MODES = ("ppe", "per_subdecision")
ORIENTATIONS = ("objective", "literal")
WEIGHTINGS = ("mean", "sum")


@dataclass(frozen=True)
class Lottery:
    """Finite-support lottery; build with :meth:`of` to merge and validate."""

    support: tuple[tuple[Bundle, Fraction], ...]

    def __post_init__(self):
        probs = [p for _, p in self.support]
        if any(p <= 0 for p in probs):
            raise ValueError("lottery probabilities must be positive")
        if sum(probs) != 1:
            raise ValueError("lottery probabilities must sum to one")
        if len({b for b, _ in self.support}) != len(self.support):
            raise ValueError("lottery support bundles must be distinct")

    @classmethod
    def of(cls, pairs: Iterable[tuple[Bundle, Fraction]]) -> "Lottery":
        acc: dict[Bundle, Fraction] = {}
        for b, p in pairs:
            if p:
                acc[b] = acc.get(b, Fraction(0)) + Fraction(p)
        return cls(tuple(sorted(acc.items())))

    @classmethod
    def degenerate(cls, b: Bundle) -> "Lottery":
        return cls(((b, Fraction(1)),))

    def prob(self, b: Bundle) -> Fraction:
        for x, p in self.support:
            if x == b:
                return p
        return Fraction(0)

    def vector(self, grid: "OutcomeGrid") -> tuple[Fraction, ...]:
        v = [Fraction(0)] * len(grid)
        for b, p in self.support:
            v[grid.index(b)] += p
        return tuple(v)


def _mirror(b: Bundle) -> Bundle:
    return tuple(reversed(b))


@dataclass(frozen=True)
class OutcomeGrid:
    """Ordered finite outcome set; always contains the zero bundle."""

    points: tuple[Bundle, ...]
    _pos: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if len(set(self.points)) != len(self.points):
            raise ValueError("grid points must be distinct")
        if not self.points or not any(all(q == 0 for q in y) for y in self.points):
            raise ValueError("outcome grid must contain the zero bundle")
        self._pos.update({y: i for i, y in enumerate(self.points)})

    @classmethod
    def build(cls, bundles: Iterable[Bundle], symmetry: bool = False) -> "OutcomeGrid":
        pts = set(bundles)
        if not pts:
            raise ValueError("cannot build a grid from no bundles")
        dim = len(next(iter(pts)))
        pts.add(tuple(Fraction(0) for _ in range(dim)))
        if symmetry:
            pts |= {_mirror(y) for y in pts}
        return cls(tuple(sorted(pts)))

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, b) -> bool:
        return b in self._pos

    def index(self, b: Bundle) -> int:
        return self._pos[b]

    def orbits(self, symmetry: bool) -> list[int]:
        """Orbit id per grid point (identity when symmetry is off)."""
        if not symmetry:
            return list(range(len(self.points)))
        ids: dict[Bundle, int] = {}
        out = []
        for y in self.points:
            key = tuple(sorted(y))
            out.append(ids.setdefault(key, len(ids)))
        return out


@dataclass(frozen=True)
class FarkasSystem:
    """Strict rows (must be ranked > 0) and weak rows (>= 0) over grid coordinates."""

    dim: int
    strict_rows: tuple[tuple[Fraction, ...], ...]
    weak_rows: tuple[tuple[Fraction, ...], ...] = ()

    def __post_init__(self):
        for r in self.strict_rows + self.weak_rows:
            if len(r) != self.dim:
                raise ValueError("row length differs from the system dimension")
            if sum(r) != 0:
                raise ValueError("every row must be a difference of two probability vectors")


@dataclass(frozen=True)
class LarpResult:
    rationalizable: bool
    utility: tuple[Fraction, ...] | None = None  # separating index when rationalizable
    certificate: tuple[tuple[Fraction, ...], tuple[Fraction, ...]] | None = None  # (phi_strict, phi_weak)
    lp_rounds: int = 0

    def __bool__(self) -> bool:
        return self.rationalizable


def _int_rows(rows: Sequence[Sequence[Fraction]]) -> tuple[np.ndarray, list[int]]:
    """Scale each row to coprime integers; return the matrix and the scale factors."""
    out, scales = [], []
    for r in rows:
        s = 1
        for v in r:
            s = math.lcm(s, Fraction(v).denominator)
        ints = [int(Fraction(v) * s) for v in r]
        g = 0
        for v in ints:
            g = math.gcd(g, v)
        g = g or 1
        out.append([v // g for v in ints])
        scales.append(Fraction(s, g))
    dim = len(rows[0]) if rows else 0
    return np.array(out, dtype=object).reshape(len(rows), dim), scales


def larp_feasibility(system: FarkasSystem, batch: int | None = None, accelerate: bool = False) -> LarpResult:
    """Decide whether some index u has ``r.u > 0`` on strict rows and ``w.u >= 0`` on weak rows.

    Solved by constraint generation: an exact phase-1 simplex on a working
    subset of strict rows either finds a convex combination of them that
    cancels against the weak rows (not rationalizable; that combination is
    the certificate) or yields a separating u, which is checked exactly
    against all rows; violated rows join the working set.

    ``accelerate`` first asks a floating-point LP for a candidate index or
    certificate support; any such hint is verified exactly before use, so the
    verdict never depends on floating point.
    """
    if not system.strict_rows:
        return LarpResult(True, tuple(Fraction(0) for _ in range(system.dim)))
    S, s_scale = _int_rows(system.strict_rows)
    W, w_scale = _int_rows(system.weak_rows) if system.weak_rows else (np.zeros((0, system.dim), dtype=object), [])
    res = _solve_int(S, W, batch, accelerate=accelerate)
    if res.rationalizable:
        return res
    phi_s, phi_w = res.certificate
    # undo the per-row integer scaling and renormalize the strict weights
    ps = [p * sc for p, sc in zip(phi_s, s_scale)]
    pw = [p * sc for p, sc in zip(phi_w, w_scale)]
    tot = sum(ps)
    return LarpResult(False, None, (tuple(p / tot for p in ps), tuple(p / tot for p in pw)), res.lp_rounds)


def _check_utility(S: np.ndarray, W: np.ndarray, u: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Exact strict-row values and the weak rows violated by integer index u."""
    uo = np.array(list(u), dtype=object)
    sv = S.dot(uo)
    bad_w = np.flatnonzero(W.dot(uo) < 0) if W.shape[0] else np.array([], dtype=int)
    return sv, bad_w


def _exact_on(S: np.ndarray, W: np.ndarray, working: Sequence[int]):
    """Exact phase 1 for a convex combination of the working strict rows cancelling against weak rows."""
    dim = S.shape[1]
    n_w = W.shape[0]
    cols = [S[i] for i in working] + [W[j] for j in range(n_w)]
    A = [[int(c[d]) for c in cols] for d in range(dim)]
    A.append([1] * len(working) + [0] * n_w)
    return phase1(A, [0] * dim + [1])


def _certificate(n_s: int, working: Sequence[int], x) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    phi = [Fraction(0)] * n_s
    for pos, i in enumerate(working):
        phi[i] = x[pos]
    return tuple(phi), tuple(x[len(working) :])


def _float_hint(S: np.ndarray, W: np.ndarray):
    """Ask HiGHS for a separating index or for the rows of a likely certificate.

    Returns ("u", ints) or ("rows", indices) or None. Nothing returned here is
    trusted: the caller verifies it exactly.
    """
    from scipy.optimize import linprog

    n_s, dim = S.shape
    Sf = S.astype(float)
    Wf = W.astype(float)
    # variables (u, t): maximize t subject to S u >= t, W u >= 0, |u| <= 1, t <= 1
    A_ub = np.hstack([-Sf, np.ones((n_s, 1))])
    if W.shape[0]:
        A_ub = np.vstack([A_ub, np.hstack([-Wf, np.zeros((W.shape[0], 1))])])
    b_ub = np.zeros(A_ub.shape[0])
    c = np.zeros(dim + 1)
    c[-1] = -1.0
    bounds = [(-1.0, 1.0)] * dim + [(None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    t = -res.fun
    if t > 1e-7:
        u = res.x[:dim]
        scale = 2**24 / max(1e-300, np.abs(u).max())
        return "u", [int(round(v * scale)) for v in u]
    duals = -res.ineqlin.marginals[:n_s]
    rows = np.flatnonzero(duals > 1e-9)
    return ("rows", [int(i) for i in rows]) if rows.size else None


def _solve_int(
    S: np.ndarray,
    W: np.ndarray,
    batch: int | None = None,
    guess: np.ndarray | None = None,
    accelerate: bool = False,
) -> LarpResult:
    """Core of :func:`larp_feasibility` on integer row matrices (object dtype)."""
    n_s, dim = S.shape
    n_w = W.shape[0]
    zero = np.flatnonzero(~np.any(S != 0, axis=1))
    if zero.size:
        phi = [Fraction(0)] * n_s
        phi[int(zero[0])] = Fraction(1)
        return LarpResult(False, None, (tuple(phi), tuple(Fraction(0) for _ in range(n_w))))
    seed: list[int] = []
    if accelerate:
        hint = _float_hint(S, W)
        if hint is not None and hint[0] == "u":
            sv, bad_w = _check_utility(S, W, hint[1])
            if not bad_w.size and np.all(sv > 0):
                return LarpResult(True, tuple(Fraction(v) for v in _integerize(hint[1])), None, 0)
        elif hint is not None:
            seed = hint[1]
            r = _exact_on(S, W, seed)
            if r.feasible:
                return LarpResult(False, None, _certificate(n_s, seed, r.x), 1)
    batch = batch or max(8, 2 * dim)
    u0 = guess if guess is not None else np.zeros(dim)
    vals = S.astype(float) @ u0
    working = list(dict.fromkeys(seed + [int(i) for i in np.argsort(vals, kind="stable")[: min(batch, n_s)]]))
    in_work = np.zeros(n_s, dtype=bool)
    in_work[working] = True
    rounds = 0
    while True:
        rounds += 1
        r = _exact_on(S, W, working)
        if r.feasible:
            return LarpResult(False, None, _certificate(n_s, working, r.x), rounds)
        u = _integerize(r.farkas[:dim])
        sv, bad_w = _check_utility(S, W, u)
        bad_s = np.flatnonzero(sv <= 0)
        if bad_s.size == 0 and bad_w.size == 0:
            return LarpResult(True, tuple(Fraction(v) for v in u), None, rounds)
        if bad_w.size:
            raise ArithmeticError("simplex dual violates a weak row it was constrained by")
        fresh = [int(i) for i in bad_s if not in_work[i]]
        if not fresh:
            raise ArithmeticError("constraint generation stalled on an already-included row")
        fresh.sort(key=lambda i: sv[i] / max(1, int(np.abs(S[i]).max())))
        fresh = fresh[:batch]
        working.extend(fresh)
        in_work[fresh] = True


def _integerize(v: Sequence[Fraction]) -> list[int]:
    den = 1
    for x in v:
        den = math.lcm(den, Fraction(x).denominator)
    ints = [int(Fraction(x) * den) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    return [x // g for x in ints] if g else ints


# --- ancillary lottery data --------------------------------------------------


def slot_weights(alpha: Fraction, n: int, mode: str, orientation: str, weighting: str) -> tuple[Fraction, Fraction]:
    """(weight per narrow slot, weight on the final-bundle slot) for one unit."""
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if orientation not in ORIENTATIONS:
        raise ValueError(f"unknown orientation {orientation!r}")
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown narrow weighting {weighting!r}")
    a = alpha if orientation == "objective" else 1 - alpha
    if mode == "per_subdecision":
        return a, 1 - a
    if n == 1:
        # the narrow and final bundles coincide; keep a single slot
        return Fraction(0), Fraction(1)
    if weighting == "mean":
        return a / n, 1 - a
    total = n * a + (1 - a)
    return a / total, (1 - a) / total


@dataclass(frozen=True)
class Unit:
    """One ancillary observation before it is mapped onto a grid.

    ``chosen`` lists the narrow bundles and the final bundle; ``bounds`` lists,
    for every feasible selection, the per-slot upper bounds (narrow slots
    first, final-bundle slot last).
    """

    label: str
    chosen_narrow: tuple[Bundle, ...]
    chosen_final: Bundle
    bounds: tuple[tuple[Bundle, ...], ...]


_PPE_BOUNDS: dict[Decision, tuple] = {}


def _ppe_bounds(decision: Decision) -> tuple[tuple[Bundle, ...], ...]:
    """Every joint selection as (narrow bounds..., final-bundle bound); shared across profiles."""
    hit = _PPE_BOUNDS.get(decision)
    if hit is None:
        rows = []
        for z in product(*(b.lines for b in decision.subdecisions)):
            tot = z[0]
            for v in z[1:]:
                tot = add(tot, v)
            rows.append(tuple(z) + (tot,))
        hit = _PPE_BOUNDS[decision] = tuple(rows)
    return hit


def decision_units(decision: Decision, line_idx: Sequence[int], mode: str) -> list[Unit]:
    sheets = [b.lines for b in decision.subdecisions]
    picks = [s[i] for s, i in zip(sheets, line_idx)]
    final = aggregate_choice(decision, picks)
    if mode == "ppe":
        return [Unit(decision.id, tuple(picks), final, _ppe_bounds(decision))]
    if mode != "per_subdecision":
        raise ValueError(f"unknown mode {mode!r}")
    units = []
    for k, sheet in enumerate(sheets):
        rest = tuple(q - pq for q, pq in zip(final, picks[k]))
        bounds = tuple((x, add(x, rest)) for x in sheet)
        units.append(Unit(f"{decision.id}.{k + 1}", (picks[k],), final, bounds))
    return units


def design_units(design: ExperimentDesign, choices: SubjectChoices, mode: str = "ppe") -> list[Unit]:
    choices.validate(design)
    out = []
    for d in design.decisions:
        out.extend(decision_units(d, [choices.choices[k] for k in d.keys], mode))
    return out


def unit_supports(units: Sequence[Unit], wn: Fraction, wa: Fraction) -> set[Bundle]:
    pts: set[Bundle] = set()
    for u in units:
        if wn:
            pts.update(u.chosen_narrow)
        if wa:
            pts.add(u.chosen_final)
    return pts


@dataclass(frozen=True)
class AncillaryObservation:
    chosen: Lottery
    menu: frozenset  # of Lottery


def ancillary_dataset(
    design: ExperimentDesign,
    choices: SubjectChoices,
    alpha,
    mode: str = "ppe",
    orientation: str = "objective",
    weighting: str = "mean",
    symmetry: bool = False,
    enrich: bool = False,
) -> tuple[OutcomeGrid, list[AncillaryObservation]]:
    """Chosen lotteries and their menus over the outcome grid.

    The grid holds the supports of the chosen lotteries and the zero bundle
    (closed under mirroring when ``symmetry`` is set); ``enrich`` adds every
    feasible sheet line as well.
    """
    units = design_units(design, choices, mode)
    grid = _grid_for(design, units, alpha, mode, orientation, weighting, symmetry, enrich)
    out = []
    for u in units:
        wn, wa = slot_weights(alpha, len(u.chosen_narrow), mode, orientation, weighting)
        chosen = Lottery.of([(x, wn) for x in u.chosen_narrow] + [(u.chosen_final, wa)])
        menu = set()
        for combo in _menu_combos(u, grid.points, wn, wa):
            menu.add(Lottery.of([(grid.points[i], wn) for i in combo[:-1]] + [(grid.points[combo[-1]], wa)]))
        out.append(AncillaryObservation(chosen, frozenset(menu)))
    return grid, out


def _grid_for(design, units, alpha, mode, orientation, weighting, symmetry, enrich) -> OutcomeGrid:
    pts: set[Bundle] = set()
    for u in units:
        wn, wa = slot_weights(alpha, len(u.chosen_narrow), mode, orientation, weighting)
        pts |= unit_supports([u], wn, wa)
    if enrich:
        for key in design.keys:
            pts.update(design.budget(key).lines)
    return OutcomeGrid.build(pts, symmetry)


_BOUND_ARRAYS: dict[int, tuple] = {}


def _as_ints(bundles: Sequence[Bundle], scale: int) -> np.ndarray:
    return np.array([[int(q * scale) for q in b] for b in bundles], dtype=np.int64)


def _bound_array(bounds: tuple[tuple[Bundle, ...], ...]) -> tuple[np.ndarray, int]:
    """Bounds as an integer array (selections, slots, goods), cached per bounds object."""
    hit = _BOUND_ARRAYS.get(id(bounds))
    if hit is not None and hit[0] is bounds:
        return hit[1], hit[2]
    scale = 1
    for bd in bounds:
        for b in bd:
            for q in b:
                scale = math.lcm(scale, q.denominator)
    arr = np.array([[[int(q * scale) for q in b] for b in bd] for bd in bounds], dtype=np.int64)
    _BOUND_ARRAYS[id(bounds)] = (bounds, arr, scale)
    return arr, scale


def _menu_combos(unit: Unit, points: Sequence[Bundle], wn: Fraction, wa: Fraction) -> set[tuple[int, ...]]:
    """Index tuples (narrow slots..., final slot) of all menu lotteries; zero-weight slots pinned to -1."""
    n = len(unit.chosen_narrow)
    B, bscale = _bound_array(unit.bounds)
    pscale = 1
    for y in points:
        for q in y:
            pscale = math.lcm(pscale, q.denominator)
    scale = math.lcm(bscale, pscale)
    P = _as_ints(points, scale)
    B = B * (scale // bscale)
    # below[s, k, j]: grid point j lies below the slot-k bound of selection s
    below = np.all(P[None, None, :, :] <= B[:, :, None, :], axis=3)
    sigs = np.unique(below.reshape(below.shape[0], -1), axis=0).reshape(-1, n + 1, len(points))
    combos: set[tuple[int, ...]] = set()
    for sig in sigs:
        narrow = [tuple(np.flatnonzero(sig[k])) if wn else (-1,) for k in range(n)]
        final = tuple(np.flatnonzero(sig[n])) if wa else (-1,)
        for pick in product(*narrow):
            key = tuple(sorted(int(i) for i in pick))
            for f in final:
                combos.add(key + (int(f),))
    return combos


# --- fast row construction for the grid search ---------------------------------


@dataclass
class UnitStructure:
    """Menu of one unit as grid-index combinations, independent of alpha."""

    n: int
    chosen: tuple[int, ...]  # grid ids: narrow slots..., final slot; -1 for a weightless slot
    combos: np.ndarray  # (M, n + 1) grid ids


def unit_structure(unit: Unit, points: Sequence[Bundle], degenerate: str | None) -> UnitStructure:
    """Menu structure over grid indices. ``degenerate`` is ``narrow`` or ``final`` when that slot has zero weight."""
    n = len(unit.chosen_narrow)
    pos = {y: i for i, y in enumerate(points)}
    wn = 0 if degenerate == "narrow" else 1
    wa = 0 if degenerate == "final" else 1
    combos = _menu_combos(unit, points, wn, wa)
    chosen_n = tuple(sorted(pos[x] if wn else -1 for x in unit.chosen_narrow))
    chosen = chosen_n + ((pos[unit.chosen_final] if wa else -1),)
    arr = np.array(sorted(combos), dtype=np.int64).reshape(len(combos), n + 1)
    return UnitStructure(n, chosen, arr)


def unit_rows(st: UnitStructure, dim: int, wn: Fraction, wa: Fraction) -> np.ndarray:
    """Integer grid rows p - q (common positive scale) for one unit, excluding q = p."""
    den = math.lcm(wn.denominator, wa.denominator)
    a, c = int(wn * den), int(wa * den)
    M = st.combos.shape[0]
    q = np.zeros((M, dim), dtype=np.int64)
    p = np.zeros(dim, dtype=np.int64)
    for j, w in [(j, a) for j in range(st.n)] + [(st.n, c)]:
        if st.chosen[j] >= 0:
            p[st.chosen[j]] += w
        col = st.combos[:, j]
        ok = np.flatnonzero(col >= 0)
        np.add.at(q, (ok, col[ok]), w)
    diff = p[None, :] - q
    return diff[np.any(diff != 0, axis=1)]


def project(R: np.ndarray, orbit: Sequence[int], n_orb: int) -> np.ndarray:
    """Sum grid coordinates within each symmetry orbit."""
    P = np.zeros((len(orbit), n_orb), dtype=np.int64)
    P[np.arange(len(orbit)), orbit] = 1
    return R @ P


@dataclass
class PreparedSubject:
    """Alpha-independent pieces of the lottery test for one choice profile."""

    units: list[Unit]
    mode: str
    orientation: str
    weighting: str
    symmetry: bool
    enrich_points: tuple[Bundle, ...] = ()
    accelerate: bool = False
    _cache: dict = field(default_factory=dict)

    def weights(self, alpha: Fraction) -> list[tuple[Fraction, Fraction]]:
        return [slot_weights(alpha, len(u.chosen_narrow), self.mode, self.orientation, self.weighting) for u in self.units]

    def structures(self, alpha: Fraction):
        ws = self.weights(alpha)
        pattern = tuple((wn == 0, wa == 0) for wn, wa in ws)
        if pattern not in self._cache:
            pts: set[Bundle] = set(self.enrich_points)
            for u, (wn, wa) in zip(self.units, ws):
                pts |= unit_supports([u], wn, wa)
            grid = OutcomeGrid.build(pts, self.symmetry)
            orbit = grid.orbits(self.symmetry)
            sts = []
            for u, (zn, za) in zip(self.units, pattern):
                sts.append(unit_structure(u, grid.points, "narrow" if zn else ("final" if za else None)))
            self._cache[pattern] = (grid, orbit, max(orbit) + 1, sts)
        return self._cache[pattern], ws

    def rows(self, alpha: Fraction) -> tuple[OutcomeGrid, list[int], np.ndarray]:
        (grid, orbit, n_orb, sts), ws = self.structures(alpha)
        blocks = [unit_rows(st, len(grid), wn, wa) for st, (wn, wa) in zip(sts, ws)]
        return grid, orbit, project(np.vstack(blocks), orbit, n_orb)

    def test(self, alpha) -> LarpResult:
        alpha = Fraction(alpha)
        grid, orbit, R = self.rows(alpha)
        if R.shape[0] == 0:
            return LarpResult(True, tuple(Fraction(0) for _ in range(R.shape[1])))
        R = _dedupe(R)
        guess = _guess_utility(grid, orbit, R.shape[1])
        return _solve_int(R.astype(object), np.zeros((0, R.shape[1]), dtype=object), guess=guess, accelerate=self.accelerate)


def _dedupe(R: np.ndarray) -> np.ndarray:
    g = np.gcd.reduce(np.abs(R), axis=1)
    g[g == 0] = 1
    return np.unique(R // g[:, None], axis=0)


def _guess_utility(grid: OutcomeGrid, orbit: Sequence[int], n_orb: int) -> np.ndarray:
    """A concave symmetric index used only to order the first working rows."""
    u = np.zeros(n_orb)
    for y, o in zip(grid.points, orbit):
        u[o] = sum(math.sqrt(float(q)) for q in y)
    return u


def prepare(
    design: ExperimentDesign,
    choices: SubjectChoices,
    mode: str = "ppe",
    orientation: str = "objective",
    weighting: str = "mean",
    symmetry: bool = False,
    enrich: bool = False,
    accelerate: bool = False,
) -> PreparedSubject:
    units = design_units(design, choices, mode)
    extra: tuple[Bundle, ...] = ()
    if enrich:
        extra = tuple(sorted({b for key in design.keys for b in design.budget(key).lines}))
    return PreparedSubject(units, mode, orientation, weighting, symmetry, extra, accelerate)


def alpha_grid(n: int) -> list[Fraction]:
    if n < 1:
        raise ValueError("alpha grid needs at least one step")
    return [Fraction(k, n) for k in range(n + 1)]


def pnb_test(
    design: ExperimentDesign,
    choices: SubjectChoices,
    alphas: Sequence = None,
    mode: str = "ppe",
    symmetry: bool = False,
    orientation: str = "objective",
    weighting: str = "mean",
    enrich: bool = False,
    accelerate: bool = False,
) -> list[Fraction]:
    """Sorted list of grid values of alpha at which the choices are PNB-rationalizable."""
    alphas = alpha_grid(100) if alphas is None else [Fraction(a) for a in alphas]
    if not alphas:
        raise ValueError("alpha grid is empty")
    prep = prepare(design, choices, mode, orientation, weighting, symmetry, enrich, accelerate)
    return sorted(a for a in set(alphas) if prep.test(a).rationalizable)


def system_for(
    design: ExperimentDesign,
    choices: SubjectChoices,
    alpha,
    mode: str = "ppe",
    orientation: str = "objective",
    weighting: str = "mean",
    symmetry: bool = False,
    enrich: bool = False,
) -> tuple[OutcomeGrid, FarkasSystem]:
    """The Farkas system over the full grid, with symmetry as explicit weak rows.

    Slower than the orbit-merged rows :func:`pnb_test` uses, but it spells
    the system out literally and serves as a cross-check.
    """
    grid, data = ancillary_dataset(design, choices, alpha, mode, orientation, weighting, symmetry, enrich)
    strict = []
    for obs in data:
        p = obs.chosen.vector(grid)
        for q in obs.menu:
            if q != obs.chosen:
                strict.append(tuple(a - b for a, b in zip(p, q.vector(grid))))
    weak = []
    if symmetry:
        for i, y in enumerate(grid.points):
            j = grid.index(_mirror(y))
            if j != i:
                r = [Fraction(0)] * len(grid)
                r[i], r[j] = Fraction(1), Fraction(-1)
                weak.append(tuple(r))
    return grid, FarkasSystem(len(grid), tuple(sorted(set(strict))), tuple(weak))


@dataclass(frozen=True)
class PnbConfig:
    """Options of the lottery test shared by reports, error searches and area counts."""

    alpha_steps: int = 100
    mode: str = "ppe"
    orientation: str = "objective"
    weighting: str = "mean"
    symmetry: bool = True
    enrich: bool = False
    accelerate: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown narrow weighting {self.weighting!r}")
        alpha_grid(self.alpha_steps)

    @property
    def alphas(self) -> tuple[Fraction, ...]:
        return tuple(alpha_grid(self.alpha_steps))

    def key(self) -> str:
        return (
            f"k/{self.alpha_steps}|{self.mode}|{self.orientation}|{self.weighting}"
            f"|sym={int(self.symmetry)}|enrich={int(self.enrich)}"
        )


def _decision_design(design: ExperimentDesign, decision: Decision) -> ExperimentDesign:
    return ExperimentDesign(design.domain, (decision,), design.goods)


@lru_cache(maxsize=200_000)
def decision_alphas(design: ExperimentDesign, decision_id: str, line_idx: tuple[int, ...], cfg: PnbConfig) -> frozenset:
    """Grid values of alpha at which one decision on its own passes.

    The one-decision system uses a subset of the outcome grid and a subset of
    the rows of the full system, so every alpha the full data pass is in here.
    """
    d = design.decision(decision_id)
    sub = _decision_design(design, d)
    ch = SubjectChoices.from_profile(sub, line_idx)
    prep = prepare(sub, ch, cfg.mode, cfg.orientation, cfg.weighting, cfg.symmetry, False, cfg.accelerate)
    if cfg.enrich:
        prep.enrich_points = tuple(sorted({b for k in design.keys for b in design.budget(k).lines}))
    return frozenset(a for a in cfg.alphas if prep.test(a).rationalizable)


def candidate_alphas(design: ExperimentDesign, choices: SubjectChoices, cfg: PnbConfig) -> frozenset:
    """Intersection of the per-decision passing sets: a superset of the joint passing set."""
    out = frozenset(cfg.alphas)
    for d in design.decisions:
        out &= decision_alphas(design, d.id, tuple(choices.choices[k] for k in d.keys), cfg)
        if not out:
            break
    return out


def _search_order(alphas) -> list[Fraction]:
    return sorted(alphas, key=lambda a: (abs(a - Fraction(1, 2)), a))


def passing_alphas(design: ExperimentDesign, choices: SubjectChoices, cfg: PnbConfig = PnbConfig()) -> list[Fraction]:
    """Same verdicts as :func:`pnb_test`, skipping alphas that a single decision already rules out."""
    cand = candidate_alphas(design, choices, cfg)
    if not cand:
        return []
    prep = prepare(design, choices, cfg.mode, cfg.orientation, cfg.weighting, cfg.symmetry, cfg.enrich, cfg.accelerate)
    return sorted(a for a in cand if prep.test(a).rationalizable)


@lru_cache(maxsize=500_000)
def _passes_cached(design: ExperimentDesign, profile: tuple[int, ...], cfg: PnbConfig) -> Fraction | None:
    choices = SubjectChoices.from_profile(design, profile)
    cand = candidate_alphas(design, choices, cfg)
    if not cand:
        return None
    prep = prepare(design, choices, cfg.mode, cfg.orientation, cfg.weighting, cfg.symmetry, cfg.enrich, cfg.accelerate)
    for a in _search_order(cand):
        if prep.test(a).rationalizable:
            return a
    return None


def pnb_witness(design: ExperimentDesign, choices: SubjectChoices, cfg: PnbConfig = PnbConfig()) -> Fraction | None:
    """Some grid alpha that rationalizes the choices (searched from 1/2 outward), or None."""
    return _passes_cached(design, choices.profile(design), cfg)
