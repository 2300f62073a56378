import numpy as np
import pytest

from transwave.acceptance import estimate_corpus, flat_matrix, standing_wave
from transwave.elliptic import EllipticOperator, standard_psi
from transwave.grid import indicator, make_grid
from transwave.waves import (CFLViolation, LinearProblem, SolverBlowup, calibrate_estimate_constant,
                             energy_estimate_check, solve_linear, speed_check)


def test_normal_mode_matches_discrete_frequency(grid64):
    g = grid64
    x = g.axis_coords
    u0 = np.sin(2 * np.pi * x)
    dt = 0.4 * g.h
    lam = (2 - 2 * np.cos(2 * np.pi * g.h)) / g.h**2
    omega = np.arccos(1 - 0.5 * dt**2 * lam) / dt
    prob = LinearProblem(g, flat_matrix(g), None, [u0, np.zeros(64)], T=100 * dt, dt=dt,
                         level_one=np.cos(omega * dt) * u0)
    traj, _ = solve_linear(prob, track_high=False)
    exact = np.cos(omega * traj.times)[:, None] * u0
    assert traj.values.shape[0] == 101
    assert np.max(np.abs(traj.values - exact)) <= 1e-10


def test_zero_problem_stays_zero(grid64):
    prob = LinearProblem(grid64, flat_matrix(grid64), None, [grid64.zeros()] * 2, T=0.5)
    traj, trace = solve_linear(prob)
    assert np.all(traj.values == 0.0)
    assert np.all(trace.energy == 0.0)
    assert energy_estimate_check(trace, 4.0).margin == 0.0


def test_discrete_energy_conserved(grid64):
    dt = 0.4 * grid64.h
    x = grid64.axis_coords
    prob = LinearProblem(grid64, flat_matrix(grid64), None, [np.sin(2 * np.pi * x), np.zeros(64)], T=1000 * dt, dt=dt,
                         snapshot_stride=100)
    _, trace = solve_linear(prob, track_high=False)
    assert np.max(np.abs(trace.discrete / trace.discrete[0] - 1)) <= 1e-8


def test_cfl_enforced(grid64):
    with pytest.raises(CFLViolation):
        LinearProblem(grid64, flat_matrix(grid64), None, [grid64.zeros()] * 2, T=0.5, dt=0.5 * grid64.h)


def test_blowup_detected(grid64):
    x = grid64.axis_coords
    prob = LinearProblem(grid64, flat_matrix(grid64), None, [np.cos(np.pi * x), np.zeros(64)], T=3.0, psi=-60.0)
    with pytest.raises(SolverBlowup) as info:
        solve_linear(prob, track_high=False)
    assert info.value.step > 0


def test_damped_static_limit():
    g = make_grid(1, 32)
    psi = 4 * standard_psi(g).data
    steady = EllipticOperator(g, psi).solve(indicator(g).data)
    prob = LinearProblem(g, flat_matrix(g), None, [g.zeros()] * 2, T=40.0, interface_source=np.ones(32), damping=1.0,
                         psi=psi, snapshot_stride=10**6)
    traj, _ = solve_linear(prob, track_high=False)
    assert np.max(np.abs(traj.values[-1] - steady)) <= 1e-6 * np.max(np.abs(steady))


def test_identical_problems_do_not_leak(grid64):
    prob = standing_wave(64, T=0.5)
    rep = speed_check(prob, standing_wave(64, T=0.5), [0.0], 1.0)
    assert rep.max_leakage == 0.0


def test_no_leakage_beyond_stencil_cone(grid64):
    x = grid64.axis_coords
    bump = np.where(np.abs(x) < 0.2, np.cos(np.pi * x / 0.4) ** 4, 0.0)
    a = LinearProblem(grid64, flat_matrix(grid64), None, [np.zeros(64), np.zeros(64)], T=0.5)
    b = LinearProblem(grid64, flat_matrix(grid64), None, [bump, np.zeros(64)], T=0.5)
    # leapfrog reaches one cell per step: speed h / dt
    rep = speed_check(a, b, [0.0], grid64.h / a.dt)
    assert rep.max_leakage == 0.0


def test_calibrated_margin_nonnegative():
    _, trace = solve_linear(standing_wave(64), track_high=False)
    c = calibrate_estimate_constant(trace)
    assert energy_estimate_check(trace, c).margin >= 0.0


@pytest.mark.parametrize("name", ["variable", "moving", "interface_damped"])
def test_corpus_margins(name):
    _, trace = solve_linear(standing_wave(64), track_high=False)
    c = calibrate_estimate_constant(trace)
    _, t2 = solve_linear(estimate_corpus(64)[name], track_high=False)
    assert energy_estimate_check(t2, c, stride=4).margin >= 0.0


def test_snapshots_hold_high_norms(grid64):
    x = grid64.axis_coords
    prob = LinearProblem(grid64, flat_matrix(grid64), None, [np.sin(np.pi * x), np.zeros(64), -np.pi**2 * np.sin(np.pi * x)],
                         T=0.25, snapshot_stride=4)
    _, trace = solve_linear(prob)
    assert trace.snapshot_times.size > 0
    assert np.all(np.isfinite(trace.high))
