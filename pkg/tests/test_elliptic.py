from math import factorial

import numpy as np
import pytest

from transwave.elliptic import (DivergentBornSeries, EllipticOperator, assemble_block_system, born_solve, born_sweep,
                                geometric_fit, green_kernel, helmholtz_solve, layer_potentials, q_total,
                                regularity_gain_check, standard_born_problem, standard_psi)
from transwave.grid import GridFunction, bump_psi, indicator, make_grid, periodic_derivative


def test_operator_negative_definite(rng):
    g = make_grid(2, 16)
    op = EllipticOperator(g, standard_psi(g))
    for _ in range(5):
        w = rng.normal(size=g.shape)
        assert np.sum(w * op.apply(w)) < 0


def test_psi_validation():
    g = make_grid(1, 16)
    with pytest.raises(ValueError):
        EllipticOperator(g, np.zeros(16))
    with pytest.raises(ValueError):
        EllipticOperator(g, -np.ones(16))


def test_helmholtz_eigenfunction(grid64):
    x = grid64.axis_coords
    h = grid64.h
    rhs = np.sin(2 * np.pi * x)
    w = helmholtz_solve(GridFunction(grid64, rhs), GridFunction(grid64, np.ones(64))).data
    lam = (2 - 2 * np.cos(2 * np.pi * h)) / h**2
    assert np.max(np.abs(w - rhs / (-lam - 1))) < 1e-10


def test_helmholtz_zero_rhs(grid64):
    w = helmholtz_solve(GridFunction(grid64, grid64.zeros()), standard_psi(grid64)).data
    assert np.all(w == 0.0)


@pytest.mark.parametrize("n", [1, 2])
def test_helmholtz_bump_residual(n):
    g = make_grid(n, 32)
    c = np.zeros(n)
    c[-1] = 0.5
    psi = bump_psi(g, c, -c, 0.1)
    op = EllipticOperator(g, psi)
    rhs = indicator(g).data
    w = op.solve(rhs)
    assert op.residual(w, rhs) <= 1e-10


def test_green_kernel_symmetric_and_exact(rng):
    g = make_grid(1, 32)
    op = EllipticOperator(g, standard_psi(g))
    for _ in range(5):
        i, j = rng.integers(0, 32, size=2)
        Ei, Ej = green_kernel(op, (i,)).data, green_kernel(op, (j,)).data
        assert Ei[j] == pytest.approx(Ej[i], rel=1e-8)
    E = green_kernel(op, (5,)).data
    delta = np.zeros(32)
    delta[5] = 1 / g.cell_volume
    assert op.residual(E, delta) <= 1e-10


def test_green_superposition():
    g = make_grid(1, 16)
    op = EllipticOperator(g, standard_psi(g))
    rhs = np.cos(np.pi * g.axis_coords) + indicator(g).data
    G = np.stack([green_kernel(op, (j,)).data for j in range(16)], axis=1)
    direct = op.solve(rhs)
    assert np.allclose(G @ rhs * g.cell_volume, direct, rtol=1e-8, atol=1e-8 * np.max(np.abs(direct)))


def test_layer_potentials():
    g = make_grid(2, 16)
    op = EllipticOperator(g, standard_psi(g))
    assert np.all(layer_potentials(op, np.zeros(16), "single").data == 0.0)


def _single_layer_jumps(N):
    g = make_grid(1, N)
    op = EllipticOperator(g, standard_psi(g))
    S = layer_potentials(op, np.ones(1), "single").data
    half = N // 2
    # first differences on either side of x = 0
    return (S[half + 1] - S[half]) / g.h, (S[half] - S[half - 1]) / g.h


def test_single_layer_kink_is_grid_stable():
    a = _single_layer_jumps(16)
    b = _single_layer_jumps(32)
    assert a[0] - a[1] == pytest.approx(b[0] - b[1], rel=0.05)
    assert abs(b[0] - b[1]) > 0.5


def _double_layer_jump(N):
    g = make_grid(1, N)
    op = EllipticOperator(g, standard_psi(g))
    D = layer_potentials(op, np.ones(1), "double").data
    half = N // 2
    return D[half + 1] - D[half]


def test_double_layer_jump_grid_stable():
    a, b = _double_layer_jump(16), _double_layer_jump(32)
    assert abs(a) > 0.5
    assert a == pytest.approx(b, rel=0.05)


def test_regularity_gain_conventions(grid64):
    assert regularity_gain_check(GridFunction(grid64, grid64.zeros())) == 0.0
    assert np.isfinite(regularity_gain_check(GridFunction(grid64, np.ones(64))))


def _block_inputs(g, s=2):
    b, sources, known = standard_born_problem(g, s)
    return b, sources, known


def test_l0_back_substitution():
    g = make_grid(1, 32)
    b, sources, known = _block_inputs(g)
    sys0 = assemble_block_system(b, standard_psi(g), 2, 0.0, g)
    K = sys0.rhs(sources, known)
    res = born_solve(sys0, K)
    assert res.converged and len(res.diagnostics) == 1
    x = sys0.solve_L0(K)
    back = sys0.apply_L0(x)
    for a, c in zip(back, K):
        assert np.max(np.abs(a - c)) <= 1e-9 * np.max(np.abs(c))


def test_zero_coupling_has_no_l1():
    g = make_grid(1, 32)
    b = [np.zeros((2, 2, 32)) for _ in range(3)]
    sysb = assemble_block_system(b, standard_psi(g), 2, 5.0, g)
    x = [np.sin(np.pi * g.axis_coords)] * 2
    assert all(np.all(q == 0.0) for q in sysb.apply_L1(x))


def _poly_oracle(b, u, k, h):
    """-(d/dt)^k of d_mu(B^{mu nu} d_nu u) at t = 0 with polynomial time dependence (n = 1).

    Time is handled by coefficient arrays, space by the product rule with the
    same periodic stencils as the solver.
    """
    K = len(u) + len(b)

    def series(jets):
        out = np.zeros((K,) + jets[0].shape)
        for m, a in enumerate(jets):
            out[m] = a / factorial(m)
        return out

    def mul(P, Q):
        out = np.zeros_like(P)
        for i in range(K):
            for j in range(K - i):
                out[i + j] += P[i] * Q[j]
        return out

    def dt(P):
        out = np.zeros_like(P)
        out[:-1] = P[1:] * np.arange(1, K)[:, None]
        return out

    def dx(P, order=1):
        return np.stack([periodic_derivative(p, 0, h, order) for p in P])

    B = [[series([bb[a, c] for bb in b]) for c in range(2)] for a in range(2)]
    U = series(u)
    time_flux = mul(B[0][0], dt(U)) + mul(B[0][1], dx(U))
    # d_x (B10 U_t + B11 U_x) expanded by the product rule
    space_flux = (mul(dx(B[1][0]), dt(U)) + mul(B[1][0], dx(dt(U)))
                  + mul(dx(B[1][1]), dx(U)) + mul(B[1][1], dx(U, 2)))
    total = dt(time_flux) + space_flux
    return -factorial(k) * total[k]


@pytest.mark.parametrize("k", [0, 1])
def test_coupling_matches_polynomial_oracle(k):
    g = make_grid(1, 32)
    x = g.axis_coords
    mode = np.cos(np.pi * x)
    b = [np.stack([np.stack([c0 * mode, c1 * mode]), np.stack([c1 * mode, c2 * mode])])
         for c0, c1, c2 in [(0.3, 0.2, 1.0), (0.1, -0.4, 0.5), (0.7, 0.3, -0.2)]]
    u = [np.sin(np.pi * x), np.cos(2 * np.pi * x), x**2 * 0 + np.sin(3 * np.pi * x), np.cos(np.pi * x) ** 2]
    got = q_total(b, u, k, g.h)
    want = _poly_oracle(b, u, k, g.h)
    assert np.max(np.abs(got - want)) <= 1e-10 * max(1.0, np.max(np.abs(want)))


def _rho(eps, N=64):
    g = make_grid(1, N)
    b, sources, known = standard_born_problem(g)
    sysb = assemble_block_system(b, standard_psi(g), 2, eps, g)
    return born_solve(sysb, sysb.rhs(sources, known))


def test_contraction_linear_in_eps():
    r1, r2 = _rho(0.4).rho_hat, _rho(0.2).rho_hat
    assert r2 / r1 == pytest.approx(0.5, rel=0.2)


def test_large_eps_diverges():
    with pytest.raises(DivergentBornSeries):
        _rho(3.2)


def test_born_sweep_threshold():
    rows = born_sweep(make_grid(1, 64), [0.1, 0.4, 0.8, 1.6, 3.2])
    status = [r.status for r in rows]
    assert status[:3] == ["converged"] * 3
    assert "DivergentBornSeries" in status


def test_geometric_decay_fit():
    res = _rho(0.4)
    slope, resid = geometric_fit(res)
    assert slope == pytest.approx(np.log(res.rho_hat), abs=0.1)
    assert resid <= 0.1
