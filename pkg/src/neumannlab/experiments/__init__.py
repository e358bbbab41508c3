"""Named, reproducible experiments and their reports."""
from .registry import EXPERIMENTS, REGISTRY, Experiment, get, run_experiment
from .report import EstimateReport

__all__ = ["EXPERIMENTS", "REGISTRY", "Experiment", "EstimateReport", "get", "run_experiment"]
