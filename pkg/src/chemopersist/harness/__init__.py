"""Configuration files, scenario runs, sweeps and their outputs."""

from .config import (
    ConfigError,
    DiagnosticsSpec,
    InitialSpec,
    RunConfig,
    SweepConfig,
    load_config,
    load_sweep,
    parse_config,
    parse_sweep,
)
from .initial import build_initial
from .scenario import RunSummary, ScenarioOutcome, atomic_write, run_scenario
from .sweep import rows_to_csv, run_sweep, sweep_columns

__all__ = [
    "ConfigError",
    "DiagnosticsSpec",
    "InitialSpec",
    "RunConfig",
    "RunSummary",
    "ScenarioOutcome",
    "SweepConfig",
    "atomic_write",
    "build_initial",
    "load_config",
    "load_sweep",
    "parse_config",
    "parse_sweep",
    "rows_to_csv",
    "run_scenario",
    "run_sweep",
    "sweep_columns",
]
