import numpy as np
import pytest
from hypothesis import given, strategies as st

from transwave.acceptance import standard_interface_problem
from transwave.elliptic import standard_psi
from transwave.grid import GridFunction, cutoff_phi, indicator, make_grid
from transwave.timejets import (CoefficientModel, EllipticityViolation, Jet, ScalingError, ScalingParams, compat_jets,
                                dilate, flat_model, measure_eta0, mu_sources, project_to_torus, rescale,
                                scaling_check)
from transwave.waves import solve_linear


def test_zero_data_zero_jets(grid64):
    z = GridFunction(grid64, grid64.zeros())
    jet = compat_jets(z, z, flat_model(), 5)
    assert len(jet) == 6
    assert all(np.all(u == 0.0) for u in jet.arrays())


def test_flat_jets_use_discrete_symbol(grid64):
    x = grid64.axis_coords
    h = grid64.h
    u0 = np.sin(2 * np.pi * x)
    jet = compat_jets(GridFunction(grid64, u0), GridFunction(grid64, grid64.zeros()), flat_model(), 4).arrays()
    lam = (2 - 2 * np.cos(2 * np.pi * h)) / h**2
    assert np.allclose(jet[2], -lam * u0, atol=1e-9, rtol=0)
    assert np.all(np.abs(jet[3]) <= 1e-9)
    assert np.allclose(jet[4], lam**2 * u0, atol=1e-9 * lam**2, rtol=0)


def _interface_model(with_h: bool) -> CoefficientModel:
    def A(U):
        z = 0.0 * U
        return [[-(1.0 + 0.5 * U * U), z], [z, 1.0 + z]]

    def H(U, dU):
        return (1.0 + U) if with_h else 0.0 * U

    return CoefficientModel("iface", 1, A, H=H, gamma=1.0, kappa=1.0)


@pytest.mark.parametrize("N", [32, 64])
def test_interface_source_jump(N):
    g = make_grid(1, N)
    x = g.axis_coords
    u0 = 0.5 * np.cos(np.pi * x)
    z = GridFunction(g, g.zeros())
    a = compat_jets(GridFunction(g, u0), z, _interface_model(True), 2).arrays()[2]
    b = compat_jets(GridFunction(g, u0), z, _interface_model(False), 2).arrays()[2]
    # u_tt picks up chi H / A^00 at the data
    expected = indicator(g).data * (1.0 + u0) / -(1.0 + 0.5 * u0**2)
    assert np.allclose(a - b, expected, rtol=1e-12, atol=1e-12)
    i = N // 2
    jump = (a - b)[i + 1] - (a - b)[i - 1]
    assert jump == pytest.approx((1 + u0[i + 1]) / -(1 + 0.5 * u0[i + 1] ** 2), rel=1e-12)


def test_ellipticity_violation(grid64):
    def A(U):
        z = 0.0 * U
        return [[-0.1 + z, z], [z, 1.0 + z]]

    model = CoefficientModel("weak", 1, A, kappa=1.0)
    with pytest.raises(EllipticityViolation):
        model.check_state(grid64.zeros())


def test_jet_rejects_mixed_grids():
    with pytest.raises(ValueError):
        Jet((GridFunction(make_grid(1, 8), np.zeros(8)), GridFunction(make_grid(1, 16), np.zeros(16))))


def test_mu_vanish_for_trivial_cutoffs():
    prob = standard_interface_problem(32)
    g = prob.grid
    res = mu_sources(prob, np.ones(g.shape), np.zeros(g.shape), 3)
    assert all(np.all(m == 0.0) for m in res.mu)


def test_mu_localized_on_box():
    prob = standard_interface_problem(64)
    g = prob.grid
    res = mu_sources(prob, cutoff_phi(g, 1.0).data, standard_psi(g).data, 3)
    assert res.eta0 >= 4 * g.h
    box = np.abs(g.axis_coords) <= res.eta0
    assert all(np.all(m[box] == 0.0) for m in res.mu)
    assert any(np.any(m != 0.0) for m in res.mu)


def test_eta0_dyadic():
    g = make_grid(1, 64)
    x = g.axis_coords
    f = np.where(np.abs(x) > 0.3, 1.0, 0.0)
    assert measure_eta0([f], g) == 0.25


def test_projection_with_trivial_cutoffs_is_identity():
    prob = standard_interface_problem(32)
    g = prob.grid
    p = project_to_torus(prob, np.ones(g.shape), np.zeros(g.shape), 3)
    raw = prob.raw_jets(4)
    assert all(np.array_equal(a, b) for a, b in zip(p.initial, raw))
    want = prob.m[:, :, None] + prob.eps * (prob.b[0] + 0.3 * prob.b[1])
    assert np.allclose(p.coefficients(0.3), want, rtol=1e-15, atol=1e-15)


def test_projected_data_vanish_off_cutoff():
    prob = standard_interface_problem(64)
    g = prob.grid
    phi = cutoff_phi(g, 1.0).data
    p = project_to_torus(prob, phi, standard_psi(g).data, 3)
    for u in p.initial:
        assert np.all(u[phi == 0.0] == 0.0)


def test_projected_solution_matches_raw_near_origin():
    prob = standard_interface_problem(64)
    g = prob.grid
    proj = project_to_torus(prob, cutoff_phi(g, 1.0).data, standard_psi(g).data, 3)
    raw = project_to_torus(prob, np.ones(g.shape), np.zeros(g.shape), 3)
    T = proj.eta0 / 2
    ta, _ = solve_linear(proj.linear_problem(T), track_high=False)
    tb, _ = solve_linear(raw.linear_problem(T), track_high=False)
    box = np.abs(g.axis_coords) <= proj.eta0 / 2
    assert np.max(np.abs(ta.values[:, box] - tb.values[:, box])) <= 1e-8


@given(st.integers(1, 4), st.integers(2, 4))
def test_scaling_params(j, s):
    p = ScalingParams(2.0**-j, s, 1)
    assert p.sigma == min(1.0, s - 0.5)
    assert 0 < p.eps <= 1


def test_scaling_params_reject():
    with pytest.raises(ScalingError):
        ScalingParams(0.5, 1, 3)
    with pytest.raises(ScalingError):
        ScalingParams(1.5, 3, 1)


def _fields(fine):
    x = fine.axis_coords
    U = np.sin(2 * np.pi * x) + 0.3
    A = np.stack([np.stack([-np.ones_like(x), 0 * x]), np.stack([0 * x, 1 + 0.2 * np.cos(np.pi * x)])])
    return U, A, np.cos(np.pi * x), x**2


def test_rescale_identity_at_unit_delta():
    fine = make_grid(1, 64)
    U, A, F, H = _fields(fine)
    out = rescale(U, A, F, H, fine, ScalingParams(1.0, 3, 1), 64)
    assert np.array_equal(out.u, U - U[32])
    assert np.array_equal(out.f, F)
    assert np.array_equal(out.h, H)


@pytest.mark.parametrize("delta", [1.0, 0.5, 0.25])
def test_constant_coefficients_have_no_perturbation(delta):
    fine = make_grid(1, 128)
    U, _, F, H = _fields(fine)
    A = np.stack([np.stack([-np.ones(128), np.zeros(128)]), np.stack([np.zeros(128), 2 * np.ones(128)])])
    assert np.all(rescale(U, A, F, H, fine, ScalingParams(delta, 3, 1), 32).b == 0.0)


def test_dilation_is_exact_resampling():
    fine = make_grid(1, 128)
    x = fine.axis_coords
    out = dilate(np.cos(np.pi * x), fine, 0.25, 32)
    coarse = make_grid(1, 32).axis_coords
    assert np.array_equal(out, np.cos(np.pi * 0.25 * coarse))


def test_non_dyadic_delta_rejected():
    fine = make_grid(1, 128)
    with pytest.raises(ScalingError):
        dilate(np.zeros(128), fine, 0.3, 32)


def test_scaling_of_constant_is_zero():
    fine = make_grid(1, 128)
    rows = scaling_check(np.full(128, 4.0), fine, "f_sigma", [1.0, 0.5, 0.25], 3, 0, 32)
    assert all(r.ratio == 0.0 for r in rows)


@pytest.mark.parametrize("role, ell", [("g_ell", 1), ("h_ell", 1)])
def test_scaling_ratios_grid_stable(role, ell):
    out = []
    for N in (32, 64):
        fine = make_grid(1, 4 * N)
        x = fine.axis_coords
        f = np.cos(2 * np.pi * x) if role == "g_ell" else np.where(x > 0, x**2 * (1 - x), 0.0)
        out.append(max(r.ratio for r in scaling_check(f, fine, role, [1.0, 0.5, 0.25], 3, ell, N)))
    assert 0.5 <= out[1] / out[0] <= 2.0


@pytest.mark.parametrize("s", [2, 3, 4])
def test_jet_predictor_order(s):
    # the startup level sum_l dt^l / l! u_l against the exact semi-discrete mode cos(sqrt(lam) t) u0
    g = make_grid(1, 64)
    x = g.axis_coords
    u0 = np.sin(2 * np.pi * x)
    lam = (2 - 2 * np.cos(2 * np.pi * g.h)) / g.h**2
    z = GridFunction(g, g.zeros())
    jet = compat_jets(GridFunction(g, u0), z, flat_model(), s)
    errs = []
    dts = [0.02, 0.01, 0.005]
    for dt in dts:
        errs.append(np.max(np.abs(jet.taylor_sum(dt) - np.cos(np.sqrt(lam) * dt) * u0)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= s - 0.1)
