"""Bound optimizers with convergence-rate diagnostics."""
from .core import IterationMap, Layout, LearningCurve, ParamVector, RunResult, StopRule, run

__version__ = "0.1.0"

__all__ = ["IterationMap", "Layout", "LearningCurve", "ParamVector", "RunResult", "StopRule", "run", "__version__"]
