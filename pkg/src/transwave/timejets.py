"""Compatibility jets, correction sources, rescaling and projection to the torus.

All time differentiation is done in truncated power-series arithmetic
(``Taylor``); the binomial sums of the differentiated equation come out of the
series products.  Space derivatives use the same centered stencils as the
time stepper, so jets, correction sources and stepped solutions agree at the
discrete level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Sequence

import numpy as np

from .grid import GridError, GridFunction, TorusGrid, indicator, make_grid, periodic_derivative
from .norms import intersect_norm, m_weight
from .taylor import Taylor, as_series


class EllipticityViolation(ValueError):
    pass


class LocalizationFailure(RuntimeError):
    pass


class ScalingError(ValueError):
    pass


# ---------------------------------------------------------------- jets


@dataclass(frozen=True)
class Jet:
    """Time-derivative stack (u_0, ..., u_r) at t = 0."""

    entries: tuple[GridFunction, ...]

    def __post_init__(self):
        ents = tuple(self.entries)
        if not ents:
            raise ValueError("a jet needs at least one entry")
        g, m = ents[0].grid, ents[0].m
        if any(e.grid != g or e.m != m for e in ents):
            raise GridError("jet entries must share grid and component count")
        object.__setattr__(self, "entries", ents)

    @classmethod
    def from_arrays(cls, grid: TorusGrid, arrays: Sequence[np.ndarray]) -> "Jet":
        return cls(tuple(GridFunction(grid, a) for a in arrays))

    @property
    def grid(self) -> TorusGrid:
        return self.entries[0].grid

    @property
    def order(self) -> int:
        return len(self.entries) - 1

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    def __iter__(self):
        return iter(self.entries)

    def arrays(self) -> list[np.ndarray]:
        return [e.data for e in self.entries]

    def taylor(self) -> Taylor:
        return Taylor.from_derivatives(self.arrays())

    def taylor_sum(self, t: float, upto: int | None = None) -> np.ndarray:
        """sum_{l <= upto} t^l / l! u_l."""
        upto = self.order if upto is None else upto
        out = np.zeros(self.grid.shape)
        for ell in range(upto + 1):
            out = out + t**ell / factorial(ell) * self.entries[ell].data
        return out


# ------------------------------------------------------------ the model

MatrixFn = Callable[[object], Sequence[Sequence[object]]]
SourceFn = Callable[[object, Sequence[object]], object]


def _zero_source(U, dU):
    return 0.0 * U


@dataclass(frozen=True)
class CoefficientModel:
    """A(U), F(U, dU), H(U, dU) with ellipticity constants gamma and kappa.

    The maps are written with numpy functions and arithmetic so the same
    code evaluates on arrays and on ``Taylor`` series.  ``dU`` is the list
    (d_t U, d_1 U, ..., d_n U).
    """

    name: str
    n: int
    A: MatrixFn
    F: SourceFn = _zero_source
    H: SourceFn = _zero_source
    gamma: float = 1.0
    kappa: float = 1.0
    params: dict = field(default_factory=dict)

    def matrix(self, U: np.ndarray) -> np.ndarray:
        """A^{mu nu} evaluated pointwise, shape (n+1, n+1, *U.shape)."""
        ent = self.A(U)
        out = np.zeros((self.n + 1, self.n + 1) + np.shape(U))
        for a in range(self.n + 1):
            for b in range(self.n + 1):
                out[a, b] = ent[a][b]
        return out

    def check_state(self, U: np.ndarray, samples: int = 20, seed: int = 0) -> None:
        """Sampled ellipticity: (1/gamma)|xi|^2 <= A^{ij} xi_i xi_j <= gamma |xi|^2, A^{00} <= -kappa."""
        A = self.matrix(U)
        if np.any(A[0, 0] > -self.kappa * (1 - 1e-12)):
            raise EllipticityViolation(f"A^00 > -kappa for model {self.name}: max {A[0, 0].max():.4g}")
        rng = np.random.default_rng(seed)
        spatial = A[1:, 1:]
        for _ in range(samples):
            xi = rng.normal(size=self.n)
            xi2 = float(xi @ xi)
            q = np.einsum("i,ij...,j->...", xi, spatial, xi)
            if np.any(q < xi2 / self.gamma * (1 - 1e-12)) or np.any(q > self.gamma * xi2 * (1 + 1e-12)):
                raise EllipticityViolation(f"spatial part of A leaves [1/gamma, gamma] for model {self.name}")

    def speed_bound(self, U: np.ndarray | None = None) -> float:
        """c_max = sqrt(gamma * sup |A^{ij}| / kappa)."""
        if U is None:
            return float(np.sqrt(self.gamma * self.gamma / self.kappa))
        A = self.matrix(U)
        return float(np.sqrt(self.gamma * np.max(np.abs(A[1:, 1:])) / self.kappa))


def flat_model(n: int = 1) -> CoefficientModel:
    """Constant coefficients diag(-1, 1, ..., 1) and no sources."""
    def A(U):
        z = 0.0 * U
        return [[(-1.0 if a == b == 0 else (1.0 if a == b else 0.0)) + z for b in range(n + 1)] for a in range(n + 1)]

    return CoefficientModel("flat", n, A)


# --------------------------------------------------- series helpers


def sdiff(x, axis: int, h: float):
    if isinstance(x, Taylor):
        return Taylor(periodic_derivative(x.c, axis + 1, h, 1))
    return periodic_derivative(x, axis, h, 1)


def sdd(x, i: int, j: int, h: float):
    if i == j:
        if isinstance(x, Taylor):
            return Taylor(periodic_derivative(x.c, i + 1, h, 2))
        return periodic_derivative(x, i, h, 2)
    return sdiff(sdiff(x, i, h), j, h)


def matrix_series(entries, order: int, shape) -> list[list[Taylor]]:
    return [[as_series(e, order, shape) for e in row] for row in entries]


def wave_residual(U: Taylor, A, psi, source, h: float) -> Taylor:
    """d_mu(A^{mu nu} d_nu U) - psi U - source, expanded with centered stencils."""
    K, shape = U.order, U.c.shape[1:]
    n = len(shape)
    A = matrix_series(A, K, shape)
    Ut = U.dt()
    first = [Ut] + [sdiff(U, i, h) for i in range(n)]
    total = A[0][0] * Ut.dt()
    for i in range(n):
        total = total + (A[0][1 + i] + A[1 + i][0]) * sdiff(Ut, i, h)
        for j in range(n):
            total = total + A[1 + i][1 + j] * sdd(U, i, j, h)
    for nu in range(n + 1):
        div = A[0][nu].dt()
        for i in range(n):
            div = div + sdiff(A[1 + i][nu], i, h)
        total = total + div * first[nu]
    return total - U * psi - source


def _solve_jets(u0: np.ndarray, u1: np.ndarray, order: int, h: float, coeffs: Callable, rhs: Callable, kappa: float) -> list[np.ndarray]:
    shape = np.shape(u0)
    c = np.zeros((order + 1,) + shape)
    c[0] = u0
    if order >= 1:
        c[1] = u1
    for j in range(order - 1):
        U = Taylor(c)
        A = coeffs(U)
        a00 = as_series(A[0][0], order + 1, shape).c[0]
        if np.any(np.abs(a00) < kappa / 2):
            raise EllipticityViolation("|A^00| < kappa/2 on the data")
        R = wave_residual(U, A, 0.0, rhs(U), h)
        c[j + 2] = -R.c[j] / (a00 * (j + 2) * (j + 1))
    return [c[k] * factorial(k) for k in range(order + 1)]


def compat_jets(data0: GridFunction, data1: GridFunction, model: CoefficientModel, order: int) -> Jet:
    """Formal time derivatives U~_0..U~_order of the transmission problem at t = 0."""
    g = data0.grid
    chi = indicator(g).data

    def rhs(U):
        dU = [U.dt()] + [sdiff(U, i, g.h) for i in range(g.n)]
        return model.F(U, dU) + chi * model.H(U, dU)

    arrays = _solve_jets(data0.data, data1.data, order, g.h, model.A, rhs, model.kappa)
    return Jet.from_arrays(g, arrays)


def linear_jets(u0: np.ndarray, u1: np.ndarray, grid: TorusGrid, coeff: np.ndarray, source: np.ndarray, order: int,
                psi: np.ndarray | float = 0.0, kappa: float = 1e-300) -> list[np.ndarray]:
    """Jets of d_mu(A d_nu u) - psi u = S for series coefficient arrays.

    ``coeff[k]`` is the (n+1, n+1) field of t^k / k! coefficients of A and
    ``source[k]`` the same for S (Taylor normalisation).
    """
    K = order + 1

    def coeffs(U):
        return _entries(_pad(coeff, K))

    def rhs(U):
        return Taylor(_pad(source, K)) + U * psi

    return _solve_jets(u0, u1, order, grid.h, coeffs, rhs, kappa)


def _pad(c: np.ndarray, K: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[0] >= K:
        return c[:K]
    out = np.zeros((K,) + c.shape[1:])
    out[: c.shape[0]] = c
    return out


def _entries(C: np.ndarray) -> list[list[Taylor]]:
    n1 = C.shape[1]
    return [[Taylor(C[:, a, b]) for b in range(n1)] for a in range(n1)]


# ------------------------------------------------------ scaling params


@dataclass(frozen=True)
class ScalingParams:
    delta: float
    s: int
    n: int

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ScalingError(f"delta must lie in (0, 1], got {self.delta}")
        if not self.s > self.n / 2:
            raise ScalingError(f"need s > n/2 for a positive sigma (s={self.s}, n={self.n})")

    @property
    def sigma(self) -> float:
        return min(1.0, self.s - self.n / 2)

    @property
    def eps(self) -> float:
        return self.delta**self.sigma


# -------------------------------------------- projected interface problem


@dataclass(frozen=True)
class InterfaceProblem:
    """Linear transmission problem d(m + eps b) d u = f + chi h on the torus.

    ``b``, ``f`` and ``h`` are lists of time derivatives at t = 0; the fields
    are the corresponding Taylor polynomials in t.
    """

    grid: TorusGrid
    m: np.ndarray
    b: tuple[np.ndarray, ...]
    eps: float
    f: tuple[np.ndarray, ...]
    h: tuple[np.ndarray, ...]
    data: tuple[np.ndarray, np.ndarray]

    def coefficient_series(self, weight: np.ndarray, order: int) -> np.ndarray:
        """t^k/k! coefficients of m + (eps weight) b."""
        g = self.grid
        n1 = g.n + 1
        C = np.zeros((order, n1, n1) + g.shape)
        ew = self.eps * weight
        for k in range(order):
            bk = self.b[k] / factorial(k) if k < len(self.b) else np.zeros((n1, n1) + g.shape)
            base = self.m.reshape((n1, n1) + (1,) * g.n) if k == 0 else 0.0
            C[k] = base + ew * bk
        return C

    def source_series(self, weight: np.ndarray, order: int) -> np.ndarray:
        g = self.grid
        chi = indicator(g).data
        S = np.zeros((order,) + g.shape)
        for k in range(order):
            fk = self.f[k] if k < len(self.f) else 0.0
            hk = self.h[k] if k < len(self.h) else 0.0
            S[k] = weight * ((fk + chi * hk) / factorial(k))
        return S

    def raw_jets(self, order: int) -> list[np.ndarray]:
        g = self.grid
        ones = np.ones(g.shape)
        K = order + 1
        return linear_jets(self.data[0], self.data[1], g, self.coefficient_series(ones, K),
                           self.source_series(ones, K), order)


@dataclass
class MuResult:
    mu: list[np.ndarray]
    eta0: float
    raw: list[np.ndarray]
    projected: list[np.ndarray]


def _residual_derivs(problem: InterfaceProblem, jets: list[np.ndarray], weight: np.ndarray, psi: np.ndarray) -> Taylor:
    K = len(jets)
    U = Taylor.from_derivatives([weight * u for u in jets])
    C = problem.coefficient_series(weight, K)
    S = Taylor(problem.source_series(weight, K))
    return wave_residual(U, _entries(C), psi, S, problem.grid.h)


def measure_eta0(fields: Sequence[np.ndarray], grid: TorusGrid) -> float:
    """Largest dyadic eta >= h with every field exactly zero on Q_eta."""
    box = np.max(np.abs(np.stack(grid.coords())), axis=0)
    eta, best = 1.0, 0.0
    while eta >= grid.h - 1e-15:
        inside = box <= eta + 1e-12
        if all(np.all(f[inside] == 0.0) for f in fields):
            best = eta
            break
        eta /= 2
    return best


def mu_sources(problem: InterfaceProblem, phi1: np.ndarray, psi: np.ndarray, s: int, raw: list[np.ndarray] | None = None) -> MuResult:
    """Correction sources mu_0..mu_{s-1} making phi1 u~ the jet of the projected problem.

    mu_r is the r-th time derivative of the projected residual.  The raw
    residual (zero up to rounding) is subtracted with weight phi1 so that the
    cancellation on the plateau of phi1 is exact in floating point.
    """
    g = problem.grid
    phi1 = np.asarray(phi1.data if isinstance(phi1, GridFunction) else phi1, dtype=float)
    psi = np.asarray(psi.data if isinstance(psi, GridFunction) else psi, dtype=float)
    if raw is None:
        raw = problem.raw_jets(s + 1)
    raw = [np.asarray(u, dtype=float) for u in raw[: s + 2]]
    if len(raw) < s + 2:
        raise ValueError(f"need raw jets up to order {s + 1}")
    ones = np.ones(g.shape)
    Rp = _residual_derivs(problem, raw, phi1, psi)
    Rr = _residual_derivs(problem, raw, ones, np.zeros(g.shape))
    mu = [(Rp.c[r] - phi1 * Rr.c[r]) * factorial(r) for r in range(s)]
    eta0 = measure_eta0(mu, g)
    if eta0 <= 0.0:
        raise LocalizationFailure("no box Q_eta on which every correction source vanishes")
    return MuResult(mu, eta0, raw, [phi1 * u for u in raw])


@dataclass
class ProjectedProblem:
    grid: TorusGrid
    coeff_series: np.ndarray
    source_series: np.ndarray
    mu: list[np.ndarray]
    psi: np.ndarray
    initial: list[np.ndarray]
    eta0: float

    def coefficients(self, t: float) -> np.ndarray:
        return _poly(self.coeff_series, t)

    def coefficients_dt(self, t: float) -> np.ndarray:
        return _poly(_series_dt(self.coeff_series), t)

    def source(self, t: float) -> np.ndarray:
        out = _poly(self.source_series, t)
        for ell, m in enumerate(self.mu):
            out = out + t**ell / factorial(ell) * m
        return out

    def linear_problem(self, T: float, **kwargs):
        from .waves import LinearProblem

        return LinearProblem(self.grid, self.coefficients, self.source, self.initial, T,
                             psi=self.psi, coeff_dt=self.coefficients_dt, **kwargs)


def _poly(series: np.ndarray, t: float) -> np.ndarray:
    out = np.zeros_like(series[0])
    for k in range(series.shape[0] - 1, -1, -1):
        out = out * t + series[k]
    return out


def _series_dt(series: np.ndarray) -> np.ndarray:
    out = np.zeros_like(series)
    k = np.arange(1, series.shape[0]).reshape((-1,) + (1,) * (series.ndim - 1))
    out[:-1] = series[1:] * k
    return out


def project_to_torus(problem: InterfaceProblem, phi1: np.ndarray, psi: np.ndarray, s: int) -> ProjectedProblem:
    """Coefficients m + eps phi1 b, sources phi1 (f + chi h) + mu, data phi1 u~."""
    phi1 = np.asarray(phi1.data if isinstance(phi1, GridFunction) else phi1, dtype=float)
    psi = np.asarray(psi.data if isinstance(psi, GridFunction) else psi, dtype=float)
    res = mu_sources(problem, phi1, psi, s)
    order = s + 2
    return ProjectedProblem(
        problem.grid,
        problem.coefficient_series(phi1, order),
        problem.source_series(phi1, order),
        res.mu,
        psi,
        res.projected[: s + 1],
        res.eta0,
    )


# ------------------------------------------------------------ rescaling


def _dyadic_level(delta: float) -> int:
    j = -np.log2(delta)
    if delta <= 0 or delta > 1 or abs(j - round(j)) > 1e-12:
        raise ScalingError(f"delta must be dyadic (2^-j), got {delta}")
    return int(round(j))


def dilate(arr: np.ndarray, fine: TorusGrid, delta: float, N_out: int) -> np.ndarray:
    """Sample x -> arr(delta x) on an N_out grid by exact index striding."""
    _dyadic_level(delta)
    stride = delta * fine.N / N_out
    offset = (1.0 - delta) * fine.N / 2
    if abs(stride - round(stride)) > 1e-9 or stride < 1 or abs(offset - round(offset)) > 1e-9:
        raise ScalingError(f"fine grid N={fine.N} cannot resolve delta={delta} at N={N_out}")
    idx = int(round(offset)) + int(round(stride)) * np.arange(N_out)
    out = np.asarray(arr, dtype=float)
    for ax in range(fine.n):
        out = np.take(out, idx, axis=ax)
    return out


@dataclass
class ScaledFields:
    grid: TorusGrid
    u: np.ndarray
    m: np.ndarray
    b: np.ndarray
    f: np.ndarray
    h: np.ndarray


def rescale(U: np.ndarray, A: np.ndarray, F: np.ndarray, H: np.ndarray, fine: TorusGrid, params: ScalingParams, N_out: int) -> ScaledFields:
    """u = (U(dx) - U(0))/d, m = A(0), b = (A(dx) - m)/d^sigma, f = d F(dx), h = d H(dx)."""
    d = params.delta
    origin = (fine.N // 2,) * fine.n
    U0 = np.asarray(U)[origin]
    m = np.asarray(A)[(slice(None), slice(None)) + origin]
    Ad = np.stack([np.stack([dilate(A[a, b], fine, d, N_out) for b in range(A.shape[1])]) for a in range(A.shape[0])])
    n1 = A.shape[0]
    b = (Ad - m.reshape((n1, n1) + (1,) * fine.n)) / d**params.sigma
    return ScaledFields(
        make_grid(fine.n, N_out),
        (dilate(U, fine, d, N_out) - U0) / d,
        m,
        b,
        d * dilate(F, fine, d, N_out),
        d * dilate(H, fine, d, N_out),
    )


SCALING_ROLES = ("f_sigma", "g_ell", "h_ell")


@dataclass(frozen=True)
class ScalingRow:
    role: str
    delta: float
    N: int
    ell: int
    domain: str
    ratio: float


def _scaling_norm(arr: np.ndarray, grid: TorusGrid, k: int, s: int, domain: str) -> float:
    gf = GridFunction(grid, arr)
    if domain == "half_box":
        from .norms import sobolev_norm

        return sobolev_norm(gf, s, "box_plus").value
    return intersect_norm(gf, k, s, "box").value


def scaling_check(f: np.ndarray, fine: TorusGrid, role: str, deltas: Sequence[float], s: int, ell: int, N_out: int,
                  domain: str = "box") -> list[ScalingRow]:
    """Measured LHS / RHS ratios of the rescaling bounds, per delta.

    f_sigma: |f_d|_{H^{2,s}} / |f|_{H^{2,s}} with f_d = (f(dx) - f(0)) / d^sigma.
    g_ell:   d^ell |g(dx)|_{H^{0,s-ell}} / |g|_{H^{0,s-ell}}.
    h_ell:   d^ell |h(dx)|_{H^{m,s-ell}} / |h|_{H^{m,s-ell}}, m = m_{s-ell}.
    ``domain='half_box'`` measures the H^s(Q_1^+) variant instead.
    """
    if role not in SCALING_ROLES:
        raise ValueError(f"unknown role {role!r}")
    grid = make_grid(fine.n, N_out)
    if role == "f_sigma":
        k, order = 2, s
    elif role == "g_ell":
        k, order = 0, s - ell
    else:
        k, order = m_weight(s - ell), s - ell
    base = _scaling_norm(dilate(f, fine, 1.0, N_out), grid, k, order, domain)
    origin = np.asarray(f)[(fine.N // 2,) * fine.n]
    rows = []
    for d in deltas:
        params = ScalingParams(d, s, fine.n)
        fd = dilate(f, fine, d, N_out)
        if role == "f_sigma":
            fd = (fd - origin) / d**params.sigma
            weight = 1.0
        else:
            weight = d**ell
        lhs = _scaling_norm(fd, grid, k, order, domain) * weight
        rows.append(ScalingRow(role, float(d), N_out, ell, domain, lhs / base if base > 0 else 0.0))
    return rows
