import dataclasses

import numpy as np
import pytest

from transwave.acceptance import mms_problem, observed_orders
from transwave.grid import make_grid
from transwave.norms import energy_base
from transwave.quasilinear import (MODELS, NoConvergence, comparison_matrix, continuation_monitor, linear_model,
                                   model_data, picard_map, seeded_iterate, small_model, smallest_singular_value,
                                   solve_quasilinear, taylor_iterate, uniqueness_probe, x1_distance)
from transwave.timejets import compat_jets
from transwave.waves import solve_linear


def _setup(name, N=32, T=0.5, s=3):
    g = make_grid(1, N)
    model = MODELS[name]()
    d0, d1 = model_data(name, g)
    jet = compat_jets(d0, d1, model, s)
    steps = int(np.ceil(T / (0.4 * g.h / np.sqrt(model.gamma))))
    return g, model, jet, T / steps, steps


def test_linear_model_map_is_constant():
    g, model, jet, dt, steps = _setup("linear")
    a = picard_map(seeded_iterate(jet, dt, steps, None), model, jet)
    b = picard_map(seeded_iterate(jet, dt, steps, 7, scale=0.5), model, jet)
    assert np.array_equal(a.values, b.values)


def test_linear_model_converges_after_one_step():
    g = make_grid(1, 32)
    res = solve_quasilinear(linear_model(), model_data("linear", g), 0.5, track_high=False)
    assert res.converged
    assert len(res.history) == 2
    assert res.ratios == []


def test_iterate_keeps_initial_jet():
    g, model, jet, dt, steps = _setup("small")
    Z = picard_map(taylor_iterate(jet, dt, steps), model, jet)
    u = jet.arrays()
    assert np.array_equal(Z.values[0], u[0])
    # second-order one-sided difference of the levels at t = 0
    assert np.max(np.abs(Z.velocities[0] - u[1])) <= 5 * dt**2 * np.max(np.abs(u[3]) + 1)


def test_seed_vanishes_at_start():
    g, model, jet, dt, steps = _setup("small")
    a, b = seeded_iterate(jet, dt, steps, None), seeded_iterate(jet, dt, steps, 3)
    assert np.array_equal(a.values[0], b.values[0])
    assert np.array_equal(a.velocities[0], b.velocities[0])
    assert x1_distance(a, b) > 0


def test_small_model_contracts():
    g = make_grid(1, 32)
    res = solve_quasilinear(small_model(), model_data("small", g), 1.0, track_high=False)
    assert res.converged
    assert all(r <= 0.5 for r in res.ratios)
    fixed = picard_map(res.solution, small_model(), res.jet)
    assert x1_distance(fixed, res.solution) <= 1e-9


def test_identical_seeds_identical_solutions():
    g = make_grid(1, 32)
    rep = uniqueness_probe(small_model(), model_data("small", g), 0.5, seeds=(2, 2))
    assert rep.max_distance == 0.0


def test_different_seeds_agree():
    g = make_grid(1, 32)
    rep = uniqueness_probe(small_model(), model_data("small", g), 0.5, seeds=(None, 1))
    assert rep.passed


def test_short_horizon_rejected():
    g = make_grid(1, 32)
    with pytest.raises(NoConvergence):
        solve_quasilinear(small_model(), model_data("small", g), 0.05)


def test_comparison_matrix_at_zero_delta():
    for s in (2, 3, 5):
        M = comparison_matrix(s, 0.0, 3.0)
        assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(np.triu(M, 1)[np.triu(M, 1) != 0], 1.0)
    assert smallest_singular_value(comparison_matrix(3, 0.0, 1.0)) > 0.5


def test_monitor_marks_small_solution_continuable():
    g = make_grid(1, 32)
    res = solve_quasilinear(small_model(), model_data("small", g), 0.5, track_high=False)
    rep = continuation_monitor([res.solution], small_model(), 0.01)
    assert rep.verdict == "Continuable"
    assert rep.delta0 > 0 and rep.sigma_min > 0.5


def _mismatch_error(N, inject):
    prob, exact = mms_problem(N, "jet", 1.0)
    if inject:
        jets = list(prob.initial)
        jets[2] = jets[2] + 1.0
        prob = dataclasses.replace(prob, initial=jets, dt=None)
    traj, _ = solve_linear(prob, track_high=False)
    u, ut = exact(traj.times[-1])
    return energy_base(traj.values[-1] - u, traj.velocities[-1] - ut, prob.grid)


def test_incompatible_jet_lowers_order():
    good_err = [_mismatch_error(N, False) for N in (64, 128)]
    bad_err = [_mismatch_error(N, True) for N in (64, 128)]
    good, bad = observed_orders(good_err)[0], observed_orders(bad_err)[0]
    assert good == pytest.approx(2.0, abs=0.2)
    # the O(dt^3) startup defect decays toward first order
    assert bad < good - 0.2
    assert bad_err[-1] > 1.2 * good_err[-1]
