"""Revealed-preference tests of narrow, broad and partial-narrow choice bracketing."""

from .model import DiscreteBudget, Decision, ExperimentDesign, SubjectChoices, build_design

__all__ = ["DiscreteBudget", "Decision", "ExperimentDesign", "SubjectChoices", "build_design"]
__version__ = "0.1.0"
