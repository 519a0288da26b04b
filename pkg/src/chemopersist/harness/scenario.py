"""Run one configured scenario, evaluate every check and write its outputs."""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

from .. import diagnostics as dg
from ..dynamics import RunResult, State, StopReason, run
from ..thresholds import ThresholdResult, chi_star, decay_witness, query_for
from .config import RunConfig
from .initial import build_initial


@dataclass
class RunSummary:
    stop_reason: str
    final_time: float
    steps: int
    M0: float
    M1: float
    M2: float
    M3: float
    tail_variation: float
    chi_star: float
    persistence_margin: float
    q: float
    witness: list | None
    checks: list[dg.CheckReport]
    wall_clock: float
    message: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> dg.CheckReport:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checks"] = [c.as_dict() for c in self.checks]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunSummary":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown summary fields: {sorted(unknown)}")
        data = dict(data)
        data["checks"] = [dg.CheckReport(**c) for c in data["checks"]]
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunSummary":
        return cls.from_dict(json.loads(text))


@dataclass
class ScenarioOutcome:
    """Everything a scenario run produced, for callers that need more than the summary."""

    summary: RunSummary
    result: RunResult
    threshold: ThresholdResult
    records: list = field(default_factory=list)


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def diagnostics_config(config: RunConfig, q: float) -> dg.DiagnosticsConfig:
    spec = config.diagnostics
    overrides = {"cadence": spec.cadence, "band": spec.band, "burn_in": spec.burn_in, "q": q}
    if spec.p is not None:
        overrides["p"] = spec.p
    if spec.theta is not None:
        overrides["theta"] = spec.theta
    return dg.DiagnosticsConfig.for_grid(config.grid, **overrides)


def rerecord(states: list[State], config: RunConfig, diag: dg.DiagnosticsConfig, q: float) -> list:
    """Records of stored states under a different negative-moment exponent."""
    other = replace(diag, q=q)
    return [dg.record(s, config.params, other) for s in states]


def _records_for(q: float, base_q: float, records, states, config, diag):
    return records if q == base_q else rerecord(states, config, diag, q)


def run_scenario(config: RunConfig, write: bool = True,
                 progress: Callable[[State], None] | None = None) -> ScenarioOutcome:
    """Simulate ``config`` and evaluate every check on the trajectory.

    Guard stops are reported through ``stop_reason`` and a failing
    ``global_existence`` check, never raised.  With ``write`` the trajectory
    CSV and the JSON summary go to the configured output paths.
    """
    started = time.perf_counter()
    params, grid = config.params, config.grid
    threshold = chi_star(query_for(params, **dict(config.threshold)), params)
    eps0 = params.a_min - threshold.chi_star
    q_run = config.diagnostics.q
    if q_run is None:
        q_run = threshold.q if math.isfinite(threshold.q) and threshold.q > 0 else 1.0
    diag = diagnostics_config(config, q_run)

    u0 = build_initial(grid, config.initial_u)
    v0 = build_initial(grid, config.initial_v)
    result = run(u0, v0, params, config.control, config.t_final, grid, guards=config.guards,
                 config=diag, allow_single_species=config.allow_single_species,
                 keep_states=True, progress=progress)
    records = result.records
    volume = grid.volume
    band = diag.band

    checks = [dg.CheckReport(
        "global_existence", result.reason is StopReason.REACHED_FINAL_TIME,
        min(0.0, result.state.t - config.t_final), result.state.t, details={"stop_reason": result.reason.value},
    )]
    checks.append(dg.check_mass_upper(records, params, volume, band))
    checks.append(dg.check_ln_mass_slope(records, params, volume, band))

    if math.isfinite(threshold.q):
        ode_records = _records_for(threshold.q, q_run, records, result.states, config, diag)
        checks.append(dg.check_negative_moment_ode(ode_records, params, threshold.beta, threshold.B,
                                                   threshold.branch, band))
    else:
        checks.append(dg.skipped("negative_moment_ode", "degenerate", reason="q is infinite"))

    witness = decay_witness(params, query_for(params, **dict(config.threshold)), threshold)
    if witness is not None:
        decay_records = _records_for(witness[2], q_run, records, result.states, config, diag)
    else:
        decay_records = records
    checks.append(dg.check_negative_moment_decay(decay_records, params, volume, threshold.chi_star,
                                                 witness, band))

    end = records[-1].t
    stats = dg.check_persistence(records, burn_in=min(diag.burn_in, end))
    if eps0 <= 0:
        checks.append(dg.skipped("persistence", "not-applicable", reason="a_min <= chi*", eps0=eps0))
    elif end < diag.burn_in:
        checks.append(dg.skipped("persistence", "not-applicable", reason="run ends before burn-in",
                               burn_in=diag.burn_in))
    else:
        checks.append(stats)
    checks.append(dg.check_delta0(result.monitor))
    checks.append(dg.check_dirichlet_quotient(result.monitor, band))

    d = stats.details
    summary = RunSummary(
        stop_reason=result.reason.value,
        final_time=float(result.state.t),
        steps=result.steps,
        M0=d["M0"], M1=d["M1"], M2=d["M2"], M3=d["M3"],
        tail_variation=d["tail_variation"],
        chi_star=threshold.chi_star,
        persistence_margin=eps0,
        q=q_run,
        witness=None if witness is None else list(witness),
        checks=checks,
        wall_clock=time.perf_counter() - started,
        message=result.message,
    )
    if write:
        if config.csv_path is not None:
            atomic_write(config.csv_path, dg.records_to_csv(records))
        if config.summary_path is not None:
            atomic_write(config.summary_path, summary.to_json())
    return ScenarioOutcome(summary, result, threshold, records)
