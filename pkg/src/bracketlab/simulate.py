"""Synthetic subjects with known utility, bracketing, alpha and trembles."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .induced import MODEL_KINDS, UtilityModel, decision_argmax
from .model import ExperimentDesign, SubjectChoices


@dataclass(frozen=True)
class AgentSpec:
    utility: UtilityModel
    bracketing: str
    alpha: Fraction | None = None
    tremble: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.bracketing not in MODEL_KINDS:
            raise ValueError(f"unknown bracketing {self.bracketing!r}")
        if self.bracketing == "pnb":
            if self.alpha is None or not 0 <= Fraction(self.alpha) <= 1:
                raise ValueError("pnb agents need alpha in [0, 1]")
        if not 0 <= self.tremble < 1:
            raise ValueError("tremble probability must lie in [0, 1)")

    def to_dict(self) -> dict:
        u = self.utility
        util: dict = {"kind": u.kind}
        if u.kind == "ces":
            util["exponent"] = str(u.exponent)
        if u.kind == "linear":
            util["weights"] = [str(w) for w in u.weights]
        return {
            "utility": util,
            "bracketing": self.bracketing,
            "alpha": None if self.alpha is None else str(self.alpha),
            "tremble": self.tremble,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AgentSpec":
        util = d.get("utility", {"kind": "induced_sqrt"})
        kind = util["kind"]
        if kind == "ces":
            u = UtilityModel.ces(Fraction(str(util["exponent"])))
        elif kind == "linear":
            u = UtilityModel.linear(*(Fraction(str(w)) for w in util.get("weights", (1, 1))))
        else:
            u = UtilityModel(kind)
        alpha = d.get("alpha")
        return cls(u, d["bracketing"], None if alpha is None else Fraction(str(alpha)), float(d.get("tremble", 0.0)), int(d.get("seed", 0)))


@dataclass(frozen=True)
class SimulatedSubject:
    choices: SubjectChoices
    optimum: Mapping  # untrembled line indices per subdecision
    ties: tuple[str, ...] = ()  # decisions whose optimum was broken by the lowest-index rule
    trembles: tuple[str, ...] = field(default=())


@lru_cache(maxsize=4096)
def _optimum(design: ExperimentDesign, utility: UtilityModel, bracketing: str, alpha) -> tuple[tuple[tuple[int, ...], ...], tuple[str, ...]]:
    picks, ties = [], []
    for d in design.decisions:
        opts = decision_argmax(d, utility, bracketing, alpha)
        if len(opts) > 1:
            ties.append(d.id)
        picks.append(min(opts))
    return tuple(picks), tuple(ties)


def simulate_subject(
    agent: AgentSpec, design: ExperimentDesign, subject_id: str = "", rng: np.random.Generator | None = None
) -> SimulatedSubject:
    """Optimal choices under the agent's model, then independent one-line trembles.

    Ties go to the lowest line index. A tremble moves one line up or down with
    equal chance and reflects at the ends of the sheet.
    """
    rng = np.random.default_rng(agent.seed) if rng is None else rng
    picks, ties = _optimum(design, agent.utility, agent.bracketing, agent.alpha)
    optimum = {}
    for d, pick in zip(design.decisions, picks):
        optimum.update(zip(d.keys, pick))
    choices = dict(optimum)
    moved = []
    if agent.tremble > 0:
        for key in design.keys:
            if rng.random() < agent.tremble:
                n = design.budget(key).n_lines
                step = 1 if rng.random() < 0.5 else -1
                i = choices[key] + step
                if i < 0 or i >= n:
                    i = choices[key] - step
                if 0 <= i < n:
                    choices[key] = i
                    moved.append(f"{key[0]}.{key[1]}")
    return SimulatedSubject(SubjectChoices(subject_id, choices), optimum, ties, tuple(moved))


@dataclass(frozen=True)
class Population:
    """Groups of identical agents; each group entry is (spec, count)."""

    groups: tuple[tuple[AgentSpec, int], ...]
    seed: int = 0

    @classmethod
    def from_dict(cls, d: Mapping) -> "Population":
        groups = []
        for g in d["agents"]:
            count = int(g.get("count", 1))
            if count < 1:
                raise ValueError("agent group counts must be positive")
            groups.append((AgentSpec.from_dict(g), count))
        return cls(tuple(groups), int(d.get("seed", 0)))

    def subjects(self, design: ExperimentDesign) -> list[tuple[AgentSpec, SimulatedSubject]]:
        """Simulated subjects with ids s0001, s0002, ... and one seeded substream each."""
        total = sum(c for _, c in self.groups)
        streams = np.random.SeedSequence(self.seed).spawn(total)
        out, n = [], 0
        for spec, count in self.groups:
            for _ in range(count):
                sid = f"s{n + 1:04d}"
                out.append((spec, simulate_subject(spec, design, sid, np.random.default_rng(streams[n]))))
                n += 1
        return out


def true_label(spec: AgentSpec) -> str:
    return spec.bracketing


def recovery_experiment(population: Population, design: ExperimentDesign, trials: int = 1, analyzer=None) -> dict:
    """Confusion counts of true model against assigned model over repeated simulated populations.

    ``analyzer(design, choices) -> assigned label`` defaults to the Selten
    classification pipeline.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if analyzer is None:
        from .report import classify_subject

        def analyzer(design, choices):
            return classify_subject(design, choices).label

    confusion: dict[str, dict[str, int]] = {}
    seeds = np.random.SeedSequence(population.seed).generate_state(trials)
    for t in range(trials):
        pop = Population(population.groups, int(seeds[t]))
        for spec, sub in pop.subjects(design):
            row = confusion.setdefault(true_label(spec), {})
            got = analyzer(design, sub.choices)
            row[got] = row.get(got, 0) + 1
    return {k: dict(sorted(v.items())) for k, v in sorted(confusion.items())}
