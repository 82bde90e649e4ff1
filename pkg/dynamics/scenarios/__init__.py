"""Experiment scenarios composed from the computational tools."""

from .common import ScenarioContext, build_context
from .pipeline import run_pipeline
from .runner import SCENARIOS, run

__all__ = ["ScenarioContext", "build_context", "run", "run_pipeline", "SCENARIOS"]
