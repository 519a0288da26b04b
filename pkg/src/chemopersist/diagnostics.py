"""Functionals recorded along trajectories and the inequalities checked on them.

Inequality checks work on lists of :class:`DiagnosticsRecord`.  Checks that
involve a negative-moment exponent assume the records were computed with that
same ``q`` (see :func:`record`).
"""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field, fields
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .elliptic import ModelParams, dirichlet_quotient
from .grid import Grid, holder_seminorm, integrate
from .thresholds import eval_f, q_exponent

if TYPE_CHECKING:
    from .dynamics import SolveMonitor, State


@dataclass(frozen=True)
class DiagnosticsConfig:
    p: float
    q: float
    theta: float
    cadence: int = 10
    band: float = 0.05
    burn_in: float = 50.0

    def __post_init__(self) -> None:
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.q > 0:
            raise ValueError("q must be positive")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.cadence < 1:
            raise ValueError("cadence must be a positive step count")
        if not self.band >= 0:
            raise ValueError("band must be nonnegative")

    @classmethod
    def for_grid(cls, grid: Grid, **overrides) -> "DiagnosticsConfig":
        """Defaults: p = 3N + 1 and theta = N / (4p), inside (0, N / (2p))."""
        p = overrides.pop("p", 3 * grid.dim + 1)
        theta = overrides.pop("theta", grid.dim / (4.0 * p))
        q = overrides.pop("q", 1.0)
        return cls(p=p, q=q, theta=theta, **overrides)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass_u: float
    mass_v: float
    mass_combined: float
    lp_moment: float
    neg_moment: float
    ln_mass: float
    min_w: float
    max_uv: float
    min_uv: float
    dirichlet_quotient: float
    holder_seminorm: float
    delta0_ratio: float
    # integral of (u + v)^(1 - q); the right-hand side of the negative-moment inequality needs it
    neg_moment_shift: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list[float]:
        return [getattr(self, name) for name in self.header()]


def record(state: "State", params: ModelParams, config: DiagnosticsConfig) -> DiagnosticsRecord:
    grid = state.grid
    s = state.u + state.v
    mass = integrate(grid, s)
    positive = bool(np.all(s > 0))
    if positive:
        neg = integrate(grid, s ** (-config.q))
        ln_mass = integrate(grid, np.log(s))
        shift = integrate(grid, s ** (1.0 - config.q))
    else:
        neg, ln_mass = math.inf, -math.inf
        shift = math.inf if config.q > 1 else integrate(grid, s ** (1.0 - config.q))
    w_ok = bool(np.all(state.w > 0))
    return DiagnosticsRecord(
        t=float(state.t),
        mass_u=integrate(grid, state.u),
        mass_v=integrate(grid, state.v),
        mass_combined=mass,
        lp_moment=integrate(grid, s**config.p),
        neg_moment=neg,
        ln_mass=ln_mass,
        min_w=float(np.min(state.w)),
        max_uv=float(np.max(s)),
        min_uv=float(np.min(s)),
        dirichlet_quotient=dirichlet_quotient(grid, state.w) if w_ok else math.nan,
        holder_seminorm=holder_seminorm(grid, s, config.theta),
        delta0_ratio=float(np.min(state.w)) / mass if mass > 0 else math.nan,
        neg_moment_shift=shift,
    )


@dataclass
class CheckReport:
    """Outcome of one inequality check; ``worst_margin >= 0`` means it holds."""

    name: str
    passed: bool
    worst_margin: float | None
    t_worst: float | None
    status: str = ""  # pass | fail | not-applicable | degenerate
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    def as_dict(self) -> dict:
        return asdict(self)


def skipped(name: str, status: str, **details) -> CheckReport:
    return CheckReport(name, True, None, None, status, dict(details))


def _worst(name: str, margins: Sequence[float], times: Sequence[float], **details) -> CheckReport:
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return skipped(name, "not-applicable", reason="no samples", **details)
    k = int(np.argmin(margins))
    return CheckReport(name, bool(margins[k] >= 0), float(margins[k]), float(times[k]), details=dict(details))


def m_star(rec: DiagnosticsRecord, params: ModelParams, volume: float) -> tuple[float, float]:
    """Logistic supersolution bounds for the masses from time ``rec.t`` on."""
    cap_u = params.a1 * volume / params.b1 if params.b1 > 0 else math.inf
    cap_v = params.a2 * volume / params.b2 if params.b2 > 0 else math.inf
    return max(rec.mass_u, cap_u), max(rec.mass_v, cap_v)


def check_mass_upper(trajectory: Sequence[DiagnosticsRecord], params: ModelParams, volume: float,
                     band: float = 0.05, tail: bool = True, tail_fraction: float = 0.2) -> CheckReport:
    """Mass of each species stays below its logistic supersolution bound.

    With ``tail`` the mean mass over the last ``tail_fraction`` of the time
    span must also sit below ``a_i |Omega| / b_i`` (the limsup bound).
    """
    if not trajectory:
        raise ValueError("trajectory is empty")
    m1, m2 = m_star(trajectory[0], params, volume)
    margins, times = [], []
    for rec in trajectory:
        margins.append(min(m1 * (1 + band) - rec.mass_u, m2 * (1 + band) - rec.mass_v))
        times.append(rec.t)
    details = {"m1_star": m1, "m2_star": m2}
    if tail:
        t0, t1 = trajectory[0].t, trajectory[-1].t
        cut = t1 - tail_fraction * (t1 - t0)
        tail_recs = [r for r in trajectory if r.t >= cut]
        cap_u = params.a1 * volume / params.b1 if params.b1 > 0 else math.inf
        cap_v = params.a2 * volume / params.b2 if params.b2 > 0 else math.inf
        mean_u = float(np.mean([r.mass_u for r in tail_recs]))
        mean_v = float(np.mean([r.mass_v for r in tail_recs]))
        details.update(tail_mean_u=mean_u, tail_mean_v=mean_v)
        margins.append(min(cap_u * (1 + band) - mean_u, cap_v * (1 + band) - mean_v))
        times.append(t1)
    return _worst("mass_upper", margins, times, **details)


def ln_slope_constant(params: ModelParams, volume: float, m1: float, m2: float) -> float:
    chi_sq = max(params.chi1**2, params.chi2**2)
    return (params.mu * volume * chi_sq / 4.0 - params.a_min * volume
            + (params.b_max + params.c_max) * (m1 + m2))


def check_ln_mass_slope(trajectory: Sequence[DiagnosticsRecord], params: ModelParams, volume: float,
                        band: float = 0.05) -> CheckReport:
    """Difference quotients of the integral of ln(u+v) stay above -K."""
    if any(not math.isfinite(r.ln_mass) for r in trajectory):
        return skipped("ln_mass_slope", "degenerate", reason="zero density cell")
    m1, m2 = m_star(trajectory[0], params, volume)
    K = ln_slope_constant(params, volume, m1, m2)
    margins, times = [], []
    for a, b in zip(trajectory, trajectory[1:]):
        slope = (b.ln_mass - a.ln_mass) / (b.t - a.t)
        margins.append(slope + K + band * abs(K))
        times.append(b.t)
    return _worst("ln_mass_slope", margins, times, K=K)


def check_negative_moment_ode(trajectory: Sequence[DiagnosticsRecord], params: ModelParams,
                              beta: float, B: float, branch: int = 1,
                              band: float = 0.05) -> CheckReport:
    """(1/q) d/dt int (u+v)^-q <= (f - a_min) int (u+v)^-q + (b_max + c_max) int (u+v)^(1-q).

    ``branch`` 2 swaps the chemotaxis constants in f and q.  Records must have
    been computed with the q this (beta, B) induces.
    """
    name = "negative_moment_ode"
    ca, cb = (params.chi1, params.chi2) if branch == 1 else (params.chi2, params.chi1)
    q = q_exponent(ca, cb, beta, B)
    f = eval_f(params.mu, ca, cb, beta, B)
    if any(not math.isfinite(r.neg_moment) for r in trajectory):
        return skipped(name, "degenerate", reason="zero density cell", q=q)
    if math.isinf(band):
        return skipped(name, "pass", q=q, f=f)
    bc = params.b_max + params.c_max

    def rhs(r: DiagnosticsRecord) -> tuple[float, float]:
        a, b = (f - params.a_min) * r.neg_moment, bc * r.neg_moment_shift
        return a + b, abs(a) + abs(b)

    margins, times = [], []
    for r0, r1 in zip(trajectory, trajectory[1:]):
        lhs = (r1.neg_moment - r0.neg_moment) / (q * (r1.t - r0.t))
        (v0, s0), (v1, s1) = rhs(r0), rhs(r1)
        margins.append(0.5 * (v0 + v1) + band * 0.5 * (s0 + s1) - lhs)
        times.append(r1.t)
    return _worst(name, margins, times, q=q, f=f)


def decay_envelope(t: float, tau: float, y_tau: float, q: float, eps0: float, C_tau: float) -> float:
    return math.exp(-eps0 * q * (t - tau) / 2.0) * y_tau + 2.0 * q * C_tau / eps0


def check_negative_moment_decay(trajectory: Sequence[DiagnosticsRecord], params: ModelParams,
                                volume: float, chi_star: float, witness, band: float = 0.05) -> CheckReport:
    """Explicit envelope for int (u+v)^-q in the q < 1 case.

    ``witness`` is ``(beta, B, q, branch)`` with q < 1 and
    ``a_min - f > 3 eps0 / 4`` (see ``thresholds.decay_witness``), or None.
    Records must have been computed with the witness q.
    """
    name = "negative_moment_decay"
    eps0 = params.a_min - chi_star
    if eps0 <= 0:
        return skipped(name, "not-applicable", reason="a_min <= chi*", eps0=eps0)
    if witness is None:
        return skipped(name, "not-applicable", reason="no q < 1 witness", eps0=eps0)
    beta, B, q, branch = witness
    if not q < 1:
        return skipped(name, "not-applicable", reason="q >= 1 has no explicit constant", q=q)
    if any(not math.isfinite(r.neg_moment) for r in trajectory):
        return skipped(name, "degenerate", reason="zero density cell", q=q)
    first = trajectory[0]
    m = sum(m_star(first, params, volume))
    C_tau = (params.b_max + params.c_max) * volume**q * m ** (1.0 - q)
    margins, times = [], []
    for r in trajectory[1:]:
        env = decay_envelope(r.t, first.t, first.neg_moment, q, eps0, C_tau)
        margins.append(env * (1 + band) - r.neg_moment)
        times.append(r.t)
    return _worst(name, margins, times, q=q, eps0=eps0, C_tau=C_tau,
                  asymptote=2.0 * q * C_tau / eps0, beta=beta, B=B, branch=branch)


def check_persistence(trajectory: Sequence[DiagnosticsRecord], burn_in: float) -> CheckReport:
    """Tail statistics over the second half of the run; passes when min(u+v) stays positive.

    Reports the empirical analogs M0* (tail min of min(u+v)), M1* (tail max of
    the negative moment), M2* (tail max of the L^p moment) and M3* (tail max
    of the Hoelder seminorm estimate), plus the relative tail variation of
    min(u+v).
    """
    if not trajectory or trajectory[-1].t < burn_in:
        raise ValueError(f"trajectory ends before the burn-in time {burn_in}")
    t_end = trajectory[-1].t
    tail = [r for r in trajectory if r.t >= t_end / 2.0]
    mins = np.array([r.min_uv for r in tail])
    M0 = float(mins.min())
    top = float(mins.max())
    details = {
        "M0": M0,
        "M1": float(max(r.neg_moment for r in tail)),
        "M2": float(max(r.lp_moment for r in tail)),
        "M3": float(max(r.holder_seminorm for r in tail)),
        "tail_variation": (top - M0) / top if top > 0 else math.inf,
        "window": [tail[0].t, t_end],
    }
    k = int(np.argmin(mins))
    return CheckReport("persistence", bool(M0 > 0 and math.isfinite(M0)), M0, tail[k].t, details=details)


def check_delta0(monitor: "SolveMonitor", tol: float = 1e-12) -> CheckReport:
    """min w >= delta0 * integral(u + v) on every solve of a run."""
    if monitor is None or monitor.delta0 is None:
        return skipped("delta0_bound", "not-applicable", reason="delta0 not computed")
    return CheckReport("delta0_bound", monitor.worst_delta0_margin >= -tol, monitor.worst_delta0_margin,
                       monitor.worst_delta0_time, details={"delta0": monitor.delta0, "solves": monitor.solves})


def check_dirichlet_quotient(monitor: "SolveMonitor", band: float = 0.05) -> CheckReport:
    """dirichlet_quotient(w) <= mu |Omega| (1 + band) on every solve of a run."""
    if monitor is None:
        return skipped("dirichlet_quotient", "not-applicable", reason="solves not monitored")
    margin = (1 + band) - monitor.worst_dq_ratio
    return CheckReport("dirichlet_quotient", margin >= 0, margin, monitor.worst_dq_time,
                       details={"worst_ratio": monitor.worst_dq_ratio, "solves": monitor.solves})


def format_float(x: float) -> str:
    return format(x, ".17g")


def records_to_csv(records: Sequence[DiagnosticsRecord]) -> str:
    buf = io.StringIO()
    buf.write(",".join(DiagnosticsRecord.header()) + "\n")
    for r in records:
        buf.write(",".join(format_float(x) for x in r.values()) + "\n")
    return buf.getvalue()


def records_from_csv(text: str) -> list[DiagnosticsRecord]:
    lines = text.strip("\n").split("\n")
    if lines[0].split(",") != DiagnosticsRecord.header():
        raise ValueError("CSV header does not match the record schema")
    return [DiagnosticsRecord(*(float(x) for x in line.split(","))) for line in lines[1:]]
