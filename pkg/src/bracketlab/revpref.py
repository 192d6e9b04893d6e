"""Revealed-preference relations and the nonparametric bracketing tests."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import (
    Bundle,
    Decision,
    ExperimentDesign,
    SubjectChoices,
    aggregate_budget,
    aggregate_choice,
    fmt_bundle,
)


@dataclass(frozen=True)
class Observation:
    chosen: Bundle
    feasible: tuple[Bundle, ...]
    label: str = ""

    def __post_init__(self):
        if self.chosen not in self.feasible:
            raise ValueError(f"observation {self.label}: chosen bundle is not feasible")


@dataclass(frozen=True)
class TestOutcome:
    passed: bool
    witness: str | None = None

    def __post_init__(self):
        if self.passed == (self.witness is not None):
            raise ValueError("witness must be present exactly when the test fails")

    __test__ = False  # keep pytest from collecting this class

    def __bool__(self) -> bool:
        return self.passed


PASS = TestOutcome(True)


def fail(msg: str) -> TestOutcome:
    return TestOutcome(False, msg)


@dataclass(frozen=True)
class SarpOptions:
    """Restrictions layered on top of plain SARP.

    ``symmetry`` identifies a bundle with its coordinate permutations,
    ``monotonicity`` adds weak edges from dominating bundles, and
    ``convexity`` (two goods, needs symmetry) adds a weak edge from any bundle
    that dominates a point on the segment between x and its mirror image.
    """

    symmetry: bool = False
    monotonicity: bool = False
    convexity: bool = False

    def __post_init__(self):
        if self.convexity and not self.symmetry:
            raise ValueError("the convexity restriction is defined through the mirror image; enable symmetry")


PLAIN = SarpOptions()
SYMMETRIC = SarpOptions(symmetry=True, monotonicity=True, convexity=True)


def build_nb_dataset(design: ExperimentDesign, choices: SubjectChoices) -> list[Observation]:
    choices.validate(design)
    out = []
    for key in design.keys:
        b = design.budget(key)
        out.append(Observation(b.lines[choices.choices[key]], b.lines, f"{key[0]}.{key[1]}"))
    return out


def bb_observation(decision: Decision, line_idx: Sequence[int]) -> Observation:
    chosen = aggregate_choice(decision, [b.lines[i] for b, i in zip(decision.subdecisions, line_idx)])
    return Observation(chosen, aggregate_budget(decision).bundles, decision.id)


def build_bb_dataset(design: ExperimentDesign, choices: SubjectChoices) -> list[Observation]:
    choices.validate(design)
    return [bb_observation(d, [choices.choices[k] for k in d.keys]) for d in design.decisions]


@dataclass
class RevealedRelation:
    """Strict revealed-preference edges plus weak (utility-ordering) edges over orbit nodes."""

    nodes: list[Bundle]
    strict_edges: list[tuple[int, int, int]]  # (from node, to node, observation index)
    weak: np.ndarray  # weak[a, b]: u(a) >= u(b) is implied
    self_violations: list[tuple[int, Bundle]] = field(default_factory=list)

    def adjacency(self) -> csr_matrix:
        n = len(self.nodes)
        adj = self.weak.copy()
        for a, b, _ in self.strict_edges:
            adj[a, b] = True
        np.fill_diagonal(adj, False)
        return csr_matrix(adj)


def _mirror(b: tuple) -> tuple:
    return tuple(reversed(b)) if len(b) == 2 else tuple(sorted(b, reverse=True))


def _canon(b: Bundle, symmetry: bool) -> Bundle:
    return tuple(sorted(b)) if symmetry else b


def _scale(bundles: Sequence[Bundle]) -> int:
    d = 1
    for b in bundles:
        for q in b:
            d = math.lcm(d, q.denominator)
    return d


def weak_matrix(nodes: Sequence[Bundle], opts: SarpOptions) -> np.ndarray:
    """weak[a, b] is True when the options force u(node a) >= u(node b)."""
    n = len(nodes)
    if n == 0 or not (opts.monotonicity or opts.convexity):
        return np.zeros((n, n), dtype=bool)
    s = _scale(nodes)
    arr = np.array([[int(q * s) for q in b] for b in nodes], dtype=np.int64)
    if opts.convexity:
        if arr.shape[1] != 2:
            raise ValueError("convexity restriction is implemented for two goods")
        # a dominates some (t, S - t) with t between the coordinates of b
        y1 = arr[:, 0][:, None]
        y2 = arr[:, 1][:, None]
        lo = np.minimum(arr[:, 0], arr[:, 1])[None, :]
        hi = np.maximum(arr[:, 0], arr[:, 1])[None, :]
        total = arr.sum(axis=1)[None, :]
        # the segment endpoints are b and its mirror, so this subsumes plain dominance
        w = np.maximum(lo, total - y2) <= np.minimum(hi, y1)
    else:
        w = np.all(arr[:, None, :] >= arr[None, :, :], axis=2)
        if opts.symmetry:
            mir = arr[:, ::-1] if arr.shape[1] == 2 else np.sort(arr, axis=1)[:, ::-1]
            w |= np.all(arr[:, None, :] >= mir[None, :, :], axis=2)
    np.fill_diagonal(w, False)
    return w


def revealed_relation(observations: Sequence[Observation], opts: SarpOptions = PLAIN) -> RevealedRelation:
    index: dict[Bundle, int] = {}
    nodes: list[Bundle] = []

    def node(b: Bundle) -> int:
        c = _canon(b, opts.symmetry)
        i = index.get(c)
        if i is None:
            i = index[c] = len(nodes)
            nodes.append(c)
        return i

    strict: list[tuple[int, int, int]] = []
    selfv: list[tuple[int, Bundle]] = []
    for oi, obs in enumerate(observations):
        c = node(obs.chosen)
        for y in obs.feasible:
            if y == obs.chosen:
                continue
            j = node(y)
            if j == c:
                selfv.append((oi, y))
            else:
                strict.append((c, j, oi))
    return RevealedRelation(nodes, strict, weak_matrix(nodes, opts), selfv)


def _find_path(adj: csr_matrix, src: int, dst: int) -> list[int]:
    prev = {src: src}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            break
        for v in adj.indices[adj.indptr[u] : adj.indptr[u + 1]]:
            if v not in prev:
                prev[v] = u
                queue.append(v)
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def sarp(
    observations: Sequence[Observation],
    symmetry: bool = False,
    monotonicity: bool = False,
    convexity: bool = False,
) -> TestOutcome:
    """SARP on the (optionally orbit-collapsed) revealed-preference graph.

    Fails when a chosen bundle's mirror image is affordable in its own budget,
    or when some strict edge closes a cycle through strict and weak edges.
    """
    return sarp_with(observations, SarpOptions(symmetry, monotonicity, convexity))


def sarp_with(observations: Sequence[Observation], opts: SarpOptions = PLAIN) -> TestOutcome:
    if not observations:
        return PASS
    rel = revealed_relation(observations, opts)
    if rel.self_violations:
        oi, y = rel.self_violations[0]
        obs = observations[oi]
        return fail(f"{obs.label}: chose {fmt_bundle(obs.chosen)} with its mirror {fmt_bundle(y)} affordable")
    adj = rel.adjacency()
    _, comp = connected_components(adj, directed=True, connection="strong")
    for a, b, oi in rel.strict_edges:
        if comp[a] == comp[b]:
            cycle = _find_path(adj, b, a)
            names = " -> ".join(fmt_bundle(rel.nodes[i]) for i in [a] + cycle)
            return fail(f"cycle via {observations[oi].label}: {names}")
    return PASS


def single_observation_ok(obs: Observation, opts: SarpOptions) -> bool:
    """Cheap necessary condition: the observation alone passes SARP."""
    return sarp_with([obs], opts).passed


# --- pairwise predictions -------------------------------------------------


def nb_warp(first: Observation, second: Observation) -> TestOutcome:
    """Same subdecision seen twice must get the same choice (nested budgets)."""
    a, b = set(first.feasible), set(second.feasible)
    if a <= b:
        inner, outer = first, second
    elif b <= a:
        inner, outer = second, first
    else:
        raise ValueError(f"budgets of {first.label} and {second.label} are not nested")
    if outer.chosen in set(inner.feasible) and inner.chosen != outer.chosen:
        return fail(f"{inner.label} chose {fmt_bundle(inner.chosen)} but {outer.label} chose {fmt_bundle(outer.chosen)}")
    return PASS


BBWARP_RULES = ("exact", "a-coordinate")


def bb_warp(
    two_part: Decision,
    single: Decision,
    two_part_lines: Sequence[int],
    single_line: int,
    rule: str = "exact",
) -> TestOutcome:
    """Aggregate-level WARP between a split decision and a covering one-sheet decision.

    The single-sheet choice passes vacuously when it is not attainable in the
    split decision's aggregate budget; otherwise the split decision's final
    bundle must match it (both coordinates, or only the first under the
    ``a-coordinate`` rule).
    """
    if rule not in BBWARP_RULES:
        raise ValueError(f"unknown BB-WARP rule {rule!r}")
    if len(single.subdecisions) != 1 or len(two_part.subdecisions) < 2:
        raise ValueError("bb_warp compares a multi-subdecision decision with a one-subdecision decision")
    agg = aggregate_budget(two_part)
    sheet = single.subdecisions[0].lines
    if not any(all(x[g] <= max(y[g] for y in sheet) for g in range(len(x))) for x in agg.bundles):
        raise ValueError("the one-subdecision budget does not cover the aggregate budget")
    x2 = sheet[single_line]
    if x2 not in agg.members:
        return PASS
    x1 = aggregate_choice(two_part, [b.lines[i] for b, i in zip(two_part.subdecisions, two_part_lines)])
    same = x1 == x2 if rule == "exact" else x1[0] == x2[0]
    if same:
        return PASS
    return fail(f"{two_part.id} final bundle {fmt_bundle(x1)} differs from {single.id} choice {fmt_bundle(x2)}")


def bb_mon(decision: Decision, line_idx: Sequence[int]) -> TestOutcome:
    """The final bundle must be undominated within the aggregate budget."""
    if len(decision.subdecisions) < 2:
        raise ValueError(f"bb_mon needs a decision with at least two subdecisions, {decision.id} has one")
    subs = decision.subdecisions
    if all(b.is_walrasian for b in subs) and len({b.prices[0] / b.prices[1] for b in subs}) == 1:
        return PASS  # no comparative advantage to exploit
    x = aggregate_choice(decision, [b.lines[i] for b, i in zip(decision.subdecisions, line_idx)])
    if aggregate_budget(decision).on_frontier(x):
        return PASS
    return fail(f"{decision.id} final bundle {fmt_bundle(x)} is dominated within the aggregate budget")


# --- symmetry predictions ---------------------------------------------------


def _prices(decision: Decision, k: int):
    b = decision.subdecisions[k]
    if not b.is_walrasian:
        raise ValueError(f"{decision.id}.{k + 1} is not a Walrasian budget")
    return b.prices


def nb_sym(decision: Decision, line_idx: Sequence[int]) -> TestOutcome:
    """Each subdecision buys at least as much of the (weakly) cheaper good."""
    for k, (b, i) in enumerate(zip(decision.subdecisions, line_idx)):
        p = _prices(decision, k)
        x = b.lines[i]
        for gi, gj in ((0, 1), (1, 0)):
            if p[gj] >= p[gi] and x[gi] < x[gj]:
                return fail(f"{decision.id}.{k + 1}: {fmt_bundle(x)} buys less of the cheaper good")
    return PASS


def _split_roles(decision: Decision):
    """(equal-price index, unequal-price index, dearer good, cheaper good) or None."""
    if len(decision.subdecisions) != 2:
        return None
    p = [_prices(decision, k) for k in range(2)]
    eq = [pk[0] == pk[1] for pk in p]
    if eq.count(True) != 1:
        return None
    e, u = (0, 1) if eq[0] else (1, 0)
    i, j = (0, 1) if p[u][0] > p[u][1] else (1, 0)
    return e, u, i, j


def bb_sym(decision: Decision, line_idx: Sequence[int]) -> TestOutcome:
    """Broad bracketing with symmetric preferences, evaluated literally."""
    lines = [b.lines[i] for b, i in zip(decision.subdecisions, line_idx)]
    if len(lines) == 1:
        p = _prices(decision, 0)
        x = lines[0]
        for gi, gj in ((0, 1), (1, 0)):
            if p[gi] >= p[gj] and x[gj] < x[gi]:
                return fail(f"{decision.id}: {fmt_bundle(x)} buys more of the dearer good")
        return PASS
    roles = _split_roles(decision)
    if roles is None:
        return PASS
    e, u, i, j = roles
    total = aggregate_choice(decision, lines)
    if total[i] > total[j]:
        return fail(f"{decision.id}: final bundle {fmt_bundle(total)} holds more of the good dearer in {decision.id}.{u + 1}")
    pe, pu = _prices(decision, e), _prices(decision, u)
    be, bu = decision.subdecisions[e], decision.subdecisions[u]
    if bu.income / pu[j] <= be.income / pe[i] and lines[u][i] != 0:
        return fail(f"{decision.id}.{u + 1}: must buy none of the dearer good, chose {fmt_bundle(lines[u])}")
    return PASS


def pnb_sym(decision: Decision, line_idx: Sequence[int]) -> TestOutcome:
    lines = [b.lines[i] for b, i in zip(decision.subdecisions, line_idx)]
    if len(lines) == 1:
        p = _prices(decision, 0)
        x = lines[0]
        for gi, gj in ((0, 1), (1, 0)):
            if p[gi] >= p[gj] and x[gj] < x[gi]:
                return fail(f"{decision.id}: {fmt_bundle(x)} buys more of the dearer good")
        return PASS
    roles = _split_roles(decision)
    if roles is None:
        return PASS
    e, u, i, j = roles
    total = aggregate_choice(decision, lines)
    if lines[u][j] < lines[u][i]:
        return fail(f"{decision.id}.{u + 1}: {fmt_bundle(lines[u])} buys less of the cheaper good")
    if total[j] < total[i]:
        return fail(f"{decision.id}: final bundle {fmt_bundle(total)} holds less of the cheaper good")
    return PASS


def bb_sym_convex(decision: Decision, line_idx: Sequence[int]) -> TestOutcome:
    """Decision-level symmetric SARP with the convexity closure.

    Gives the point prediction in Risk D1 and two admissible final bundles in
    D3, which the literal inequalities do not.
    """
    return sarp_with([bb_observation(decision, line_idx)], SYMMETRIC)


SYM_TESTS = {"nb_sym": nb_sym, "bb_sym": bb_sym, "pnb_sym": pnb_sym}


def sym_tests(design: ExperimentDesign, choices: SubjectChoices, decisions=("D1", "D3")) -> dict[str, TestOutcome]:
    """All symmetry predictions per decision plus their conjunction ("both")."""
    out: dict[str, TestOutcome] = {}
    for name, fn in SYM_TESTS.items():
        per = []
        for did in decisions:
            d = design.decision(did)
            res = fn(d, [choices.choices[k] for k in d.keys])
            out[f"{name}.{did.lower()}"] = res
            per.append(res)
        bad = [r.witness for r in per if not r.passed]
        out[f"{name}.both"] = PASS if not bad else fail("; ".join(bad))
    return out
