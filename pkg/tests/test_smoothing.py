import numpy as np
import pytest
from hypothesis import given, strategies as st

from transwave.grid import GridError, GridFunction, indicator, make_grid
from transwave.norms import sobolev_norm
from transwave.smoothing import extend_zero, make_kernel, mollify

LAMBDAS = (1 / 2, 1 / 4, 1 / 8, 1 / 16)


def test_extend_zero_of_one_is_indicator(grid64):
    assert np.array_equal(extend_zero(GridFunction(grid64, np.ones(64))).data, indicator(grid64).data)


def test_extend_zero_preserves_l2(grid64):
    x = grid64.axis_coords
    f = GridFunction(grid64, np.where(np.abs(x - 0.5) < 0.4, np.cos(np.pi * (x - 0.5) / 0.8) ** 4, 0.0))
    assert sobolev_norm(extend_zero(f), 0, "torus").value == pytest.approx(sobolev_norm(f, 0, "Omega").value, rel=1e-14)


def test_extend_zero_linear_profile(grid64):
    x = grid64.axis_coords
    # the plane x = 1 is sampled at index 0 (x = -1), where the limit from Omega is 1
    f = np.where(x == -1.0, 1.0, x)
    e = extend_zero(GridFunction(grid64, f)).data
    assert np.all(e[(x < 0) & (x > -1)] == 0.0)
    assert np.array_equal(e[x > 0], x[x > 0])
    assert e[x == 0.0][0] == 0.0
    assert e[0] == 0.5


@pytest.mark.parametrize("lam", [0.1, 0.25, 1.0])
def test_kernel_unit_mass_and_support(lam):
    g = make_grid(2, 32)
    k = make_kernel(g, lam)
    assert k.mass == pytest.approx(1.0, rel=1e-12)
    r = np.sqrt(sum(np.minimum(np.abs(x), 2 - np.abs(x)) ** 2 for x in g.coords()))
    assert np.all(k.weights[r >= 2 * lam] == 0.0)


def test_mollify_constant(grid64):
    out = mollify(GridFunction(grid64, np.full(64, 2.5)), 0.25).data
    assert np.allclose(out, 2.5, rtol=0, atol=1e-13)


def test_mollify_rejects_large_radius(grid64):
    with pytest.raises(GridError):
        mollify(GridFunction(grid64, np.ones(64)), 1.5)


@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(LAMBDAS))
def test_mollify_linear(a, b, lam):
    g = make_grid(1, 32)
    x = g.axis_coords
    f = GridFunction(g, np.cos(np.pi * x) + x)
    k = GridFunction(g, np.sin(3 * np.pi * x))
    lhs = mollify(a * f + b * k, lam).data
    rhs = a * mollify(f, lam).data + b * mollify(k, lam).data
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (abs(a) + abs(b) + 1))


def _errors(N, reflection_order):
    g = make_grid(1, N)
    u = GridFunction(g, np.sin(np.pi * g.axis_coords))
    return [sobolev_norm(mollify(u, lam, reflection_order) - u, 1, "Omega").value for lam in LAMBDAS]


@pytest.mark.parametrize("N", [64, 128])
def test_mollify_converges(N):
    e = _errors(N, 3)
    assert all(a > b for a, b in zip(e, e[1:]))
    assert e[-1] < 0.1 * e[0]


def test_even_reflection_misses_convergence_target():
    # plain mirror images keep a normal-derivative kink, so H^1 convergence stalls
    e = _errors(128, 1)
    assert e[-1] > 0.1 * e[0]


@pytest.mark.parametrize("N", [32, 64])
def test_mollify_bounded_on_omega(N):
    g = make_grid(1, N)
    x = g.axis_coords
    u = GridFunction(g, np.sin(np.pi * x) + 0.3 * x**2)
    ratios = [sobolev_norm(mollify(indicator(g) * u, lam), 2, "Omega").value / sobolev_norm(u, 2, "Omega").value
              for lam in LAMBDAS[:3]]
    assert max(ratios) / min(ratios) < 5.0
    assert max(ratios) < 2.0


def test_mollified_derivatives_bounded_under_doubling():
    vals = []
    for N in (64, 128, 256):
        g = make_grid(1, N)
        u = GridFunction(g, np.sin(np.pi * g.axis_coords))
        vals.append(sobolev_norm(mollify(indicator(g) * u, 0.25), 3, "Omega").value)
    assert vals[2] / vals[1] < 1.1
