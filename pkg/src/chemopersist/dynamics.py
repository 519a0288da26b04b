"""Positivity-preserving IMEX time stepping for the two-species system.

One step: explicit donor-cell chemotaxis, implicit Neumann diffusion, then a
Patankar update of the Lotka-Volterra kinetics.  ``w`` is refreshed from the
updated densities so every State is self-consistent.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import diagnostics
from .elliptic import (
    ModelParams,
    SolverError,
    delta0_margin,
    dirichlet_quotient,
    discrete_delta0,
    face_means,
    laplacian_matrix,
    residual,
    solve_w,
)
from .grid import FaceField, Grid, check_finite, divergence_faces, integrate


class StopReason(str, enum.Enum):
    REACHED_FINAL_TIME = "reached_final_time"
    SUP_BLOWUP = "sup_blowup"
    MASS_VANISHING = "mass_vanishing"
    SOLVER_FAILURE = "solver_failure"


@dataclass(frozen=True)
class State:
    grid: Grid
    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class StepControl:
    dt_max: float = 0.01
    cfl_advection: float = 0.5
    cfl_reaction: float = 0.5
    positivity_floor: float = 0.0
    # test switches: disable transport or kinetics without touching ModelParams
    chemotaxis: bool = True
    reactions: bool = True

    def __post_init__(self) -> None:
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        for name in ("cfl_advection", "cfl_reaction"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.positivity_floor < 0:
            raise ValueError("positivity_floor must be nonnegative")


@dataclass(frozen=True)
class Guards:
    """Absolute thresholds; ``None`` means relative to the initial data."""

    sup_factor: float = 1e6
    mass_factor: float = 1e-12
    sup_limit: float | None = None
    mass_limit: float | None = None

    def limits(self, u0: np.ndarray, v0: np.ndarray, grid: Grid) -> tuple[float, float]:
        sup = self.sup_limit if self.sup_limit is not None else self.sup_factor * float(np.max(u0 + v0))
        mass = self.mass_limit if self.mass_limit is not None else self.mass_factor * integrate(grid, u0 + v0)
        return sup, mass


def face_velocity(grid: Grid, w: np.ndarray, chi: float) -> FaceField:
    """``chi * grad(w) / w`` on every face (boundary faces zero)."""
    if np.any(w <= 0):
        raise ValueError("chemotactic velocity requires w > 0")
    comps = []
    for axis, (h, wf) in enumerate(zip(grid.spacing, face_means(grid, w))):
        vel = chi * (np.diff(w, axis=axis) / h) / wf
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 1)
        comps.append(np.pad(vel, pad))
    return tuple(comps)


def upwind_flux(grid: Grid, density: np.ndarray, velocity: FaceField) -> FaceField:
    comps = []
    for axis, vel in enumerate(velocity):
        n = grid.shape[axis]
        inner = np.take(vel, range(1, n), axis=axis)
        left = np.take(density, range(0, n - 1), axis=axis)
        right = np.take(density, range(1, n), axis=axis)
        flux = inner * np.where(inner > 0, left, right)
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 1)
        comps.append(np.pad(flux, pad))
    return tuple(comps)


def chemotactic_flux(grid: Grid, density: np.ndarray, w: np.ndarray, chi: float) -> FaceField:
    """Donor-cell face flux of ``chi * density * grad(w) / w``."""
    return upwind_flux(grid, density, face_velocity(grid, w, chi))


def reaction_rates(u: np.ndarray, v: np.ndarray, params: ModelParams):
    """Pointwise kinetics.

    Returns ``(rate_u, rate_v, (prod_u, loss_u), (prod_v, loss_v))`` where the
    rate is ``prod - density * loss`` and loss is the Patankar loss coefficient.
    """
    prod_u, loss_u = params.a1 * u, params.b1 * u + params.c1 * v
    prod_v, loss_v = params.a2 * v, params.b2 * v + params.c2 * u
    return prod_u - u * loss_u, prod_v - v * loss_v, (prod_u, loss_u), (prod_v, loss_v)


def max_speed(grid: Grid, state: State, params: ModelParams) -> float:
    speed = 0.0
    if np.any(state.w <= 0):
        return speed
    for chi in (params.chi1, params.chi2):
        if chi == 0:
            continue
        for comp in face_velocity(grid, state.w, chi):
            speed = max(speed, float(np.max(np.abs(comp))))
    return speed


def stable_dt(state: State, params: ModelParams, control: StepControl) -> float:
    """``min(dt_max, cfl_adv * h / (dim * max speed), cfl_react / a_max)``.

    The ``dim`` factor keeps the explicit upwind update monotone in 2D, where
    a cell can lose mass through up to four faces.
    """
    grid = state.grid
    dt = control.dt_max
    if control.chemotaxis:
        speed = max_speed(grid, state, params)
        if speed > 0:
            dt = min(dt, control.cfl_advection * min(grid.spacing) / (grid.dim * speed))
    if control.reactions and params.a_max > 0:
        dt = min(dt, control.cfl_reaction / params.a_max)
    return dt


@functools.lru_cache(maxsize=16)
def _diffusion_lu(grid: Grid, dt: float):
    matrix = (sp.identity(grid.size) - dt * laplacian_matrix(grid)).tocsc()
    return spla.splu(matrix)


def diffuse(grid: Grid, field_: np.ndarray, dt: float) -> np.ndarray:
    """One backward-Euler step of the Neumann heat equation."""
    return _diffusion_lu(grid, float(dt)).solve(field_.ravel()).reshape(grid.shape)


def initial_state(grid: Grid, u0, v0, params: ModelParams, allow_single_species: bool = False) -> State:
    u0, v0 = grid.field(u0), grid.field(v0)
    if np.any(u0 < 0) or np.any(v0 < 0):
        raise ValueError("initial densities must be nonnegative")
    mu_, mv_ = integrate(grid, u0), integrate(grid, v0)
    if mu_ + mv_ <= 0:
        raise ValueError("the combined initial mass must be positive")
    if (mu_ <= 0 or mv_ <= 0) and not allow_single_species:
        raise ValueError(
            "both initial masses must be positive; set allow_single_species to run "
            "a one-species reduction"
        )
    return State(grid, 0.0, u0, v0, solve_w(grid, u0, v0, params))


def step(state: State, params: ModelParams, control: StepControl, dt: float | None = None) -> State:
    grid = state.grid
    dt = stable_dt(state, params, control) if dt is None else dt
    u, v, w = state.u, state.v, state.w

    if control.chemotaxis:
        u_adv = u - dt * divergence_faces(grid, chemotactic_flux(grid, u, w, params.chi1))
        v_adv = v - dt * divergence_faces(grid, chemotactic_flux(grid, v, w, params.chi2))
    else:
        u_adv, v_adv = u, v

    u_t, v_t = diffuse(grid, u_adv, dt), diffuse(grid, v_adv, dt)

    if control.reactions:
        u_new = u_t * (1.0 + dt * params.a1) / (1.0 + dt * (params.b1 * u_t + params.c1 * v_t))
        v_new = v_t * (1.0 + dt * params.a2) / (1.0 + dt * (params.b2 * v_t + params.c2 * u_t))
    else:
        u_new, v_new = u_t, v_t

    if control.positivity_floor > 0:
        u_new = np.maximum(u_new, control.positivity_floor)
        v_new = np.maximum(v_new, control.positivity_floor)
    check_finite(u_new, "u")
    check_finite(v_new, "v")
    if np.any(u_new < 0) or np.any(v_new < 0):
        raise FloatingPointError(
            f"positivity lost at t={state.t + dt}: min u={u_new.min()}, min v={v_new.min()}"
        )
    return State(grid, state.t + dt, u_new, v_new, solve_w(grid, u_new, v_new, params))


@dataclass
class SolveMonitor:
    """Worst-case margins of per-solve elliptic bounds over a run."""

    delta0: float | None = None
    worst_delta0_margin: float = np.inf
    worst_delta0_time: float = 0.0
    mu_volume: float = 0.0
    worst_dq_ratio: float = 0.0
    worst_dq_time: float = 0.0
    max_residual: float = 0.0
    solves: int = 0

    def observe(self, state: State, params: ModelParams) -> None:
        grid = state.grid
        self.solves += 1
        self.max_residual = max(self.max_residual, residual(grid, state.w, state.u, state.v, params))
        if self.delta0 is not None:
            margin = delta0_margin(grid, state.w, state.u, state.v, self.delta0)
            if margin < self.worst_delta0_margin:
                self.worst_delta0_margin, self.worst_delta0_time = margin, state.t
        if np.all(state.w > 0):
            ratio = dirichlet_quotient(grid, state.w) / self.mu_volume
            if ratio > self.worst_dq_ratio:
                self.worst_dq_ratio, self.worst_dq_time = ratio, state.t


@dataclass
class RunResult:
    reason: StopReason
    state: State
    records: list
    states: list = field(default_factory=list)
    monitor: SolveMonitor | None = None
    steps: int = 0
    message: str = ""


def run(
    u0,
    v0,
    params: ModelParams,
    control: StepControl,
    t_final: float,
    grid: Grid,
    guards: Guards | None = None,
    config: "diagnostics.DiagnosticsConfig | None" = None,
    allow_single_species: bool = False,
    keep_states: bool = False,
    monitor_solves: bool = True,
    progress: Callable[[State], None] | None = None,
) -> RunResult:
    """Step from (u0, v0) until ``t_final`` or a guard fires.

    A diagnostics record (and, with ``keep_states``, the State) is kept every
    ``config.cadence`` steps, plus the initial and final states.
    """
    guards = Guards() if guards is None else guards
    config = diagnostics.DiagnosticsConfig.for_grid(grid) if config is None else config
    state = initial_state(grid, u0, v0, params, allow_single_species)
    sup_limit, mass_limit = guards.limits(state.u, state.v, grid)

    monitor = None
    if monitor_solves:
        monitor = SolveMonitor(mu_volume=params.mu * grid.volume)
        if grid.size <= 20_000:
            monitor.delta0 = discrete_delta0(grid, params)
        monitor.observe(state, params)

    records = [diagnostics.record(state, params, config)]
    states = [state] if keep_states else []
    reason, message, n = StopReason.REACHED_FINAL_TIME, "", 0
    while state.t < t_final * (1 - 1e-14):
        dt = min(stable_dt(state, params, control), t_final - state.t)
        try:
            state = step(state, params, control, dt)
        except (SolverError, FloatingPointError) as exc:
            reason, message = StopReason.SOLVER_FAILURE, str(exc)
            break
        n += 1
        if monitor is not None:
            monitor.observe(state, params)
        mass = integrate(grid, state.u + state.v)
        sup = float(np.max(state.u + state.v))
        stop = None
        if sup > sup_limit:
            stop = StopReason.SUP_BLOWUP
        elif mass < mass_limit:
            stop = StopReason.MASS_VANISHING
        final = state.t >= t_final * (1 - 1e-14)
        if stop is not None or final or n % config.cadence == 0:
            records.append(diagnostics.record(state, params, config))
            if keep_states:
                states.append(state)
            if progress is not None:
                progress(state)
        if stop is not None:
            reason = stop
            break
    return RunResult(reason, state, records, states, monitor, n, message)
