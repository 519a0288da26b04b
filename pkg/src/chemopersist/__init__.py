"""Finite-volume simulation and persistence diagnostics for a two-species
chemotaxis system with singular sensitivity and Lotka-Volterra competition."""

from .dynamics import Guards, RunResult, State, StepControl, StopReason, run, step
from .elliptic import ModelParams, discrete_delta0, solve_w
from .grid import Grid, build_grid
from .thresholds import ThresholdQuery, ThresholdResult, chi_star, eval_f, q_exponent

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "Guards",
    "ModelParams",
    "RunResult",
    "State",
    "StepControl",
    "StopReason",
    "ThresholdQuery",
    "ThresholdResult",
    "build_grid",
    "chi_star",
    "discrete_delta0",
    "eval_f",
    "q_exponent",
    "run",
    "solve_w",
    "step",
]
