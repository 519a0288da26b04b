from __future__ import annotations

from importlib import resources

import numpy as np
import pytest

from chemopersist.elliptic import ModelParams
from chemopersist.harness import load_config, run_scenario

SCENARIO_NAMES = (
    "homogeneous_coexistence.ini",
    "coexistence_bumps.ini",
    "strong_chemotaxis.ini",
    "asymmetric_species.ini",
    "planar_bumps.ini",
)


def scenario_path(name: str):
    return resources.files("chemopersist") / "scenarios" / name


def unit_params(**changes: float) -> ModelParams:
    values = dict.fromkeys(ModelParams.names(), 1.0)
    values.update(changes)
    return ModelParams(**values)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def suite_outcomes():
    """Every bundled scenario, simulated once per test session."""
    return {name: run_scenario(load_config(scenario_path(name)), write=False) for name in SCENARIO_NAMES}


# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    assert passed, f"criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
