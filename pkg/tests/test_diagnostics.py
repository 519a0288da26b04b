from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from chemopersist import diagnostics as dg
from chemopersist.dynamics import State, StepControl, run
from chemopersist.elliptic import ModelParams, discrete_delta0, solve_w
from chemopersist.grid import build_grid
from chemopersist.thresholds import decay_witness, eval_f, q_exponent

from conftest import unit_params


def _rec(t, **kw):
    base = dict(t=t, mass_u=1.0, mass_v=1.0, mass_combined=2.0, lp_moment=1.0, neg_moment=1.0,
                ln_mass=0.0, min_w=1.0, max_uv=2.0, min_uv=2.0, dirichlet_quotient=0.0,
                holder_seminorm=0.0, delta0_ratio=0.5, neg_moment_shift=1.0)
    base.update(kw)
    return dg.DiagnosticsRecord(**base)


def _bumpy_run(params, t_final=5.0, n=48, q=1.0):
    g = build_grid(1, [1.0], [n])
    (x,) = g.centers()
    u0 = 0.05 + 2 * np.exp(-((x - 0.3) ** 2) / 0.005)
    v0 = 0.05 + 2 * np.exp(-((x - 0.8) ** 2) / 0.005)
    cfg = dg.DiagnosticsConfig.for_grid(g, q=q, cadence=5)
    return g, run(u0, v0, params, StepControl(), t_final, g, config=cfg, keep_states=True), cfg


def test_config_defaults_and_validation():
    g1 = build_grid(1, [1.0], [8])
    c = dg.DiagnosticsConfig.for_grid(g1)
    assert c.p == 4 and c.theta == pytest.approx(1 / 16) and c.theta < 1 / (2 * c.p)
    c2 = dg.DiagnosticsConfig.for_grid(build_grid(2, [1, 1], [4, 4]))
    assert c2.p == 7 and c2.theta < 2 / (2 * 7)
    for bad in ({"p": 1.0}, {"q": 0.0}, {"theta": 1.0}, {"cadence": 0}, {"band": -0.1}):
        with pytest.raises(ValueError):
            dg.DiagnosticsConfig.for_grid(g1, **bad)


def test_record_constant_state():
    g = build_grid(1, [1.0], [10])
    p = unit_params()
    u = g.constant(1.0)
    s = State(g, 0.0, u, u, solve_w(g, u, u, p))
    r = dg.record(s, p, dg.DiagnosticsConfig(p=4, q=1, theta=0.1))
    assert r.mass_combined == pytest.approx(2.0, rel=1e-15)
    assert r.lp_moment == pytest.approx(16.0, rel=1e-15)
    assert r.neg_moment == pytest.approx(0.5, rel=1e-15)
    assert r.ln_mass == pytest.approx(math.log(2.0), rel=1e-15)
    assert r.dirichlet_quotient < 1e-28 and r.holder_seminorm == 0.0  # w is constant up to rounding


def test_record_zero_cells_use_sentinels():
    g = build_grid(1, [1.0], [5])
    p = unit_params()
    u = np.array([0.0, 1.0, 1.0, 1.0, 1.0])
    s = State(g, 0.0, u, np.zeros(5), solve_w(g, u, np.zeros(5), p))
    r = dg.record(s, p, dg.DiagnosticsConfig(p=4, q=0.5, theta=0.1))
    assert r.neg_moment == math.inf and r.ln_mass == -math.inf
    assert dg.check_ln_mass_slope([r, replace(r, t=1.0)], p, 1.0).status == "degenerate"


def test_records_are_pure_functions_of_state():
    g, res, cfg = _bumpy_run(unit_params(), t_final=1.0)
    p = unit_params()
    for state, rec in zip(res.states, res.records):
        assert dg.record(state, p, cfg).values() == rec.values()


def test_delta0_ratio_dominates_discrete_constant():
    p = unit_params(chi1=2.0, nu=0.5)
    g, res, _ = _bumpy_run(p)
    d0 = discrete_delta0(g, p)
    assert all(r.delta0_ratio >= d0 - 1e-12 for r in res.records)
    assert dg.check_delta0(res.monitor).passed


def test_moment_interpolation_consistency():
    p = unit_params()
    for q in (0.3, 1.0, 2.5):
        g, res, _ = _bumpy_run(p, t_final=1.0, q=q)
        for r in res.records:
            rhs = r.mass_combined ** (q / (q + 1)) * r.neg_moment ** (1 / (q + 1))
            assert g.volume <= rhs * (1 + 1e-12)


def test_mass_upper_logistic_only_converges():
    g = build_grid(1, [2.0], [32])
    zero_chi = ModelParams(0.0, 0.0, 1.5, 1.0, 0.5, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, relaxed=True)
    (x,) = g.centers()
    res = run(0.2 + np.sin(x) ** 2, 0.5 + 0 * x, zero_chi, StepControl(), 40.0, g)
    report = dg.check_mass_upper(res.records, zero_chi, g.volume)
    assert report.passed
    assert res.records[-1].mass_u == pytest.approx(1.5 * 2.0 / 0.5, rel=0.05)


@pytest.mark.parametrize("u_level,decreasing", [(8.0, True), (0.1, False)])
def test_mass_upper_from_above_and_below(u_level, decreasing):
    g = build_grid(1, [1.0], [24])
    p = unit_params(c1=0.1, c2=0.1)
    res = run(g.constant(u_level) + 0.01 * np.arange(24), g.constant(0.5), p, StepControl(), 10.0, g)
    masses = np.array([r.mass_u for r in res.records])
    report = dg.check_mass_upper(res.records, p, g.volume, tail=False)
    assert report.passed
    if decreasing:
        assert np.all(np.diff(masses) <= 1e-12)
    else:
        assert masses.max() <= p.a1 * g.volume / p.b1 * 1.05


def test_mass_upper_detects_violation():
    p = unit_params()
    traj = [_rec(0.0, mass_u=0.5), _rec(1.0, mass_u=1.2)]
    report = dg.check_mass_upper(traj, p, 1.0, tail=False)
    assert not report.passed and report.t_worst == 1.0
    assert report.worst_margin == pytest.approx(1.05 - 1.2)


def test_ln_slope_constant_arithmetic():
    assert dg.ln_slope_constant(unit_params(), 1.0, 1.0, 1.0) == pytest.approx(3.25)


def test_ln_slope_stationary():
    p = unit_params()
    traj = [_rec(float(t), ln_mass=0.3) for t in range(5)]
    report = dg.check_ln_mass_slope(traj, p, 1.0)
    assert report.passed and report.details["K"] == pytest.approx(3.25)


def test_ln_slope_on_a_run():
    p = unit_params()
    _, res, _ = _bumpy_run(p)
    assert dg.check_ln_mass_slope(res.records, p, 1.0).passed


def test_negative_moment_ode_equilibrium_arithmetic():
    p = unit_params(c1=0.2, c2=0.2)
    beta, B = 0.3, 0.4
    q = q_exponent(1, 1, beta, B)
    f = eval_f(1, 1, 1, beta, B)
    E = 1 / 1.2  # each species; u + v = 2E
    s = 2 * E
    traj = [_rec(float(t), neg_moment=s**-q, neg_moment_shift=s ** (1 - q)) for t in range(4)]
    rhs = (f - p.a_min) * s**-q + (p.b_max + p.c_max) * s ** (1 - q)
    report = dg.check_negative_moment_ode(traj, p, beta, B, band=0.0)
    assert report.passed == (rhs >= 0)
    assert report.worst_margin == pytest.approx(rhs, rel=1e-12)


def test_negative_moment_ode_on_a_run():
    p = unit_params()
    beta, B = 0.2, 0.1
    q = q_exponent(1, 1, beta, B)
    _, res, _ = _bumpy_run(p, q=q)
    assert dg.check_negative_moment_ode(res.records, p, beta, B).passed


def test_negative_moment_ode_detects_growth():
    p = unit_params()
    beta, B = 0.2, 0.1
    q = q_exponent(1, 1, beta, B)
    traj = [_rec(0.0, neg_moment=1.0, neg_moment_shift=0.0), _rec(1.0, neg_moment=100.0, neg_moment_shift=0.0)]
    assert not dg.check_negative_moment_ode(traj, p, beta, B).passed
    assert dg.check_negative_moment_ode(traj, p, beta, B, band=math.inf).passed


def test_decay_envelope_at_equilibrium():
    p = unit_params()
    witness = decay_witness(p)
    beta, B, q, _ = witness
    chi = 0.25
    eps0 = p.a_min - chi
    E = 1.0
    traj = [_rec(float(t), mass_u=0.5, mass_v=0.5, neg_moment=E**-q) for t in (0, 50, 100, 200)]
    report = dg.check_negative_moment_decay(traj, p, 1.0, chi, witness)
    C = (p.b_max + p.c_max) * 1.0**q * 2.0 ** (1 - q)
    assert report.details["asymptote"] == pytest.approx(2 * q * C / eps0)
    assert report.passed


def test_decay_not_applicable_cases():
    p = unit_params()
    traj = [_rec(0.0), _rec(1.0)]
    assert dg.check_negative_moment_decay(traj, p, 1.0, 1.5, None).status == "not-applicable"
    assert dg.check_negative_moment_decay(traj, p, 1.0, 0.25, None).status == "not-applicable"
    assert dg.check_negative_moment_decay(traj, p, 1.0, 0.25, (1, 1, 1.2, 1)).status == "not-applicable"


def test_persistence_requires_burn_in():
    with pytest.raises(ValueError):
        dg.check_persistence([_rec(0.0), _rec(10.0)], burn_in=50.0)


def test_persistence_statistics():
    traj = [_rec(float(t), min_uv=1.0 + 0.01 * (t % 3), neg_moment=t, lp_moment=2 * t) for t in range(101)]
    report = dg.check_persistence(traj, burn_in=50.0)
    assert report.passed and report.worst_margin == 1.0
    assert report.details["M1"] == 100 and report.details["M2"] == 200
    assert report.details["tail_variation"] == pytest.approx(0.02 / 1.02)
    zero = [_rec(float(t), min_uv=0.0) for t in range(101)]
    assert not dg.check_persistence(zero, burn_in=50.0).passed


def test_dirichlet_check_on_a_run():
    p = unit_params(chi1=2.0)
    _, res, _ = _bumpy_run(p)
    report = dg.check_dirichlet_quotient(res.monitor)
    assert report.passed and report.details["worst_ratio"] <= 1.05


def test_csv_round_trip_is_exact():
    _, res, _ = _bumpy_run(unit_params(), t_final=0.5)
    text = dg.records_to_csv(res.records)
    assert text.endswith("\n") and "\r" not in text
    assert text.splitlines()[0].split(",") == dg.DiagnosticsRecord.header()
    back = dg.records_from_csv(text)
    assert [r.values() for r in back] == [r.values() for r in res.records]


def test_csv_rejects_wrong_header():
    with pytest.raises(ValueError):
        dg.records_from_csv("t,mass\n0,1\n")


def test_check_report_sign_convention():
    report = dg.CheckReport("x", False, -0.1, 2.0)
    assert report.status == "fail"
    assert dg.CheckReport("x", True, 0.0, 2.0).status == "pass"
