"""Helmholtz-type solves for (Delta - psi), layer potentials and the Born series.

The operator psi - Delta is symmetric positive definite on the torus when
psi >= 0 is positive somewhere, so every solve is a preconditioned CG run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .grid import GridFunction, TorusGrid, bump_psi, indicator, periodic_derivative
from .norms import sobolev_norm

DEFAULT_TOL = 1e-10


class EllipticSolveError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class DivergentBornSeries(RuntimeError):
    def __init__(self, message: str, diagnostics: list):
        super().__init__(message)
        self.diagnostics = diagnostics


def standard_psi(grid: TorusGrid) -> GridFunction:
    """Default damping bump: centres at x^n = +-1/2 (other coordinates 0), radius 0.1."""
    c = np.zeros(grid.n)
    c[-1] = 0.5
    return bump_psi(grid, c, -c, 0.1)


def _periodic_laplacian_matrix(grid: TorusGrid) -> sp.csr_matrix:
    N, h = grid.N, grid.h
    one_d = sp.diags([np.ones(N - 1), -2.0 * np.ones(N), np.ones(N - 1)], [-1, 0, 1], format="lil")
    one_d[0, N - 1] = 1.0
    one_d[N - 1, 0] = 1.0
    one_d = one_d.tocsr() / (h * h)
    eye = sp.identity(N, format="csr")
    lap = sp.csr_matrix((grid.size, grid.size))
    for ax in range(grid.n):
        term = None
        for a in range(grid.n):
            m = one_d if a == ax else eye
            term = m if term is None else sp.kron(term, m, format="csr")
        lap = lap + term
    return lap.tocsr()


class EllipticOperator:
    """The stencil Delta - psi together with its CG solver."""

    def __init__(self, grid: TorusGrid, psi: GridFunction | np.ndarray):
        p = psi.data if isinstance(psi, GridFunction) else np.asarray(psi, dtype=float)
        if np.any(p < 0):
            raise ValueError("psi must be non-negative")
        if not np.max(p) > 0:
            raise ValueError("psi must be positive somewhere")
        self.grid = grid
        self.psi = p
        self.lap = _periodic_laplacian_matrix(grid)
        # the SPD operator psi - Delta
        self.spd = (sp.diags(p.ravel()) - self.lap).tocsr()
        self.precond = sp.diags(1.0 / self.spd.diagonal())

    def apply(self, w: np.ndarray) -> np.ndarray:
        """(Delta - psi) w."""
        return -(self.spd @ np.asarray(w, dtype=float).ravel()).reshape(self.grid.shape)

    def solve(self, rhs: np.ndarray, tol: float = DEFAULT_TOL, maxiter: int | None = None) -> np.ndarray:
        b = -np.asarray(rhs, dtype=float).ravel()
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            return np.zeros(self.grid.shape)
        maxiter = maxiter or 20 * self.grid.size
        x = np.zeros_like(b)
        rel = np.inf
        for _ in range(3):
            x, _info = cg(self.spd, b, x0=x, rtol=0.5 * tol, atol=0.0, maxiter=maxiter, M=self.precond)
            rel = float(np.linalg.norm(self.spd @ x - b)) / bnorm
            if rel <= tol:
                return x.reshape(self.grid.shape)
        raise EllipticSolveError("CG did not reach the residual target", rel)

    def residual(self, w: np.ndarray, rhs: np.ndarray) -> float:
        r = self.apply(w) - rhs
        return float(np.linalg.norm(r) / max(np.linalg.norm(rhs), np.finfo(float).tiny))


def helmholtz_solve(rhs: GridFunction, psi: GridFunction, tol: float = DEFAULT_TOL) -> GridFunction:
    op = EllipticOperator(rhs.grid, psi)
    return GridFunction(rhs.grid, np.stack([op.solve(c, tol) for c in rhs.values]))


def green_kernel(op: EllipticOperator, y: tuple[int, ...], tol: float = DEFAULT_TOL) -> GridFunction:
    """E(., y) with (Delta - psi) E = discrete delta of mass one at grid index y."""
    g = op.grid
    delta = np.zeros(g.shape)
    delta[tuple(y)] = 1.0 / g.cell_volume
    return GridFunction(g, op.solve(delta, tol))


def layer_potentials(op: EllipticOperator, density: np.ndarray, kind: str = "single", tol: float = DEFAULT_TOL) -> GridFunction:
    """Single or double layer potential of a density on the plane x^n = 0.

    Both are sums of Green kernels over the plane, so each is one solve with a
    source concentrated on the plane (double: a dipole across the first cell
    on the Omega side).
    """
    g = op.grid
    half = g.N // 2
    v = np.asarray(density, dtype=float).reshape((g.N,) * (g.n - 1))
    src = np.zeros(g.shape)
    plane = (slice(None),) * (g.n - 1)
    if kind == "single":
        src[plane + (half,)] = v / g.h
    elif kind == "double":
        src[plane + (half + 1,)] = v / g.h**2
        src[plane + (half,)] = -v / g.h**2
    else:
        raise ValueError(f"unknown layer potential kind {kind!r}")
    if not np.any(src):
        return GridFunction(g, np.zeros(g.shape))
    return GridFunction(g, op.solve(src, tol))


def regularity_gain_check(u: GridFunction, k: int = 0, psi: GridFunction | None = None, tol: float = DEFAULT_TOL) -> float:
    """|R_Omega L(chi u)|_{H^{k+2}(Omega)} / |u|_{H^k(Omega)} with L = (Delta - psi)^{-1}."""
    if k > 2:
        raise ValueError("k must be at most 2")
    g = u.grid
    denom = sobolev_norm(u, k, "Omega").value
    if denom == 0.0:
        return 0.0
    op = EllipticOperator(g, psi if psi is not None else standard_psi(g))
    w = op.solve(indicator(g).data * u.data, tol)
    return sobolev_norm(GridFunction(g, w), k + 2, "Omega").value / denom


# ------------------------------------------------------------ block system


def _d(u: np.ndarray, i: int, h: float) -> np.ndarray:
    return periodic_derivative(u, i, h, 1)


def _dd(u: np.ndarray, i: int, j: int, h: float) -> np.ndarray:
    if i == j:
        return periodic_derivative(u, i, h, 2)
    return _d(_d(u, i, h), j, h)


def q_zero(b: list[np.ndarray], u: list[np.ndarray], k: int, h: float) -> np.ndarray:
    """Couplings of the b-jets to u_0..u_k (all of order <= k in time)."""
    n = b[0].shape[0] - 1
    total = np.zeros_like(u[0])
    for ell in range(k + 1):
        c = comb(k, ell)
        for i in range(n):
            for j in range(n):
                total = total + c * b[k - ell][1 + i, 1 + j] * _dd(u[ell], i, j, h)
                total = total + c * _d(b[k - ell][1 + i, 1 + j], i, h) * _d(u[ell], j, h)
        for j in range(n):
            total = total + c * b[k - ell + 1][0, 1 + j] * _d(u[ell], j, h)
    for ell in range(1, k + 1):
        c = comb(k, ell - 1)
        bk = b[k - ell + 1]
        for j in range(n):
            total = total + c * 2.0 * bk[0, 1 + j] * _d(u[ell], j, h)
            total = total + c * _d(bk[0, 1 + j], j, h) * u[ell]
        total = total + c * b[k - ell + 2][0, 0] * u[ell]
    for ell in range(2, k + 1):
        total = total + comb(k, ell - 2) * b[k - ell + 2][0, 0] * u[ell]
    return -total


def q_one(b: list[np.ndarray], u: list[np.ndarray], k: int, h: float) -> np.ndarray:
    n = b[0].shape[0] - 1
    v = u[k + 1]
    total = k * b[1][0, 0] * v + b[1][0, 0] * v
    for j in range(n):
        total = total + 2.0 * b[0][0, 1 + j] * _d(v, j, h) + _d(b[0][0, 1 + j], j, h) * v
    return -total


def q_two(b: list[np.ndarray], u: list[np.ndarray], k: int) -> np.ndarray:
    return -b[0][0, 0] * u[k + 2]


def q_total(b: list[np.ndarray], u: list[np.ndarray], k: int, h: float) -> np.ndarray:
    return q_zero(b, u, k, h) + q_one(b, u, k, h) + q_two(b, u, k)


@dataclass
class BlockSystem:
    """L_eps = L_0 - eps L_1 acting on the slots (u_0, ..., u_{s-1})."""

    grid: TorusGrid
    s: int
    eps: float
    b: list[np.ndarray]
    op: EllipticOperator
    tol: float = 1e-12

    def _padded(self, x: list[np.ndarray], known=None) -> list[np.ndarray]:
        z = np.zeros(self.grid.shape)
        tail = list(known) if known is not None else [z, z]
        return list(x) + tail

    def _q_rows(self, u: list[np.ndarray]) -> list[np.ndarray]:
        return [q_total(self.b, u, k, self.grid.h) for k in range(self.s)]

    def apply_L1(self, x: list[np.ndarray]) -> list[np.ndarray]:
        return self._q_rows(self._padded(x))

    def apply_L0(self, x: list[np.ndarray]) -> list[np.ndarray]:
        out = []
        for k in range(self.s):
            row = self.op.apply(x[k])
            if k + 2 < self.s:
                row = row - x[k + 2]
            out.append(row)
        return out

    def apply(self, x: list[np.ndarray]) -> list[np.ndarray]:
        return [a - self.eps * c for a, c in zip(self.apply_L0(x), self.apply_L1(x))]

    def solve_L0(self, K: list[np.ndarray]) -> list[np.ndarray]:
        """Back substitution from the last slot down."""
        x: list[np.ndarray | None] = [None] * self.s
        for k in range(self.s - 1, -1, -1):
            rhs = K[k] + x[k + 2] if k + 2 < self.s else K[k]
            x[k] = self.op.solve(rhs, self.tol)
        return x

    def rhs(self, sources: list[np.ndarray], known: list[np.ndarray]) -> list[np.ndarray]:
        """K from source jets and the known slots (u_s, u_{s+1})."""
        z = [np.zeros(self.grid.shape)] * self.s
        kq = self._q_rows(self._padded(z, known))
        K = []
        for k in range(self.s):
            row = sources[k] + self.eps * kq[k]
            if k + 2 >= self.s:
                row = row + known[k + 2 - self.s]
            K.append(row)
        return K


def assemble_block_system(b: list[np.ndarray], psi: GridFunction | np.ndarray, s: int, eps: float, grid: TorusGrid) -> BlockSystem:
    """``b[k]`` holds the (n+1)x(n+1) coefficient fields of the k-th time jet."""
    if len(b) < s + 1:
        raise ValueError(f"coefficient jet of length {len(b)} too short for s={s}")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return BlockSystem(grid, s, float(eps), [np.asarray(x, dtype=float) for x in b], EllipticOperator(grid, psi))


def slot_norm(x: list[np.ndarray], grid: TorusGrid) -> float:
    """sqrt of the summed H^1 norms of the slots."""
    total = 0.0
    for u in x:
        total += float(np.sum(u * u))
        for ax in range(grid.n):
            d = _d(u, ax, grid.h)
            total += float(np.sum(d * d))
    return float(np.sqrt(total * grid.cell_volume))


@dataclass(frozen=True)
class BornRow:
    eps: float
    iteration: int
    increment: float
    rho_hat: float


@dataclass
class BornResult:
    solution: list[np.ndarray]
    diagnostics: list[BornRow] = field(default_factory=list)
    converged: bool = False

    @property
    def rho_hat(self) -> float:
        vals = [r.rho_hat for r in self.diagnostics if np.isfinite(r.rho_hat)]
        return vals[-1] if vals else 0.0


def born_solve(system: BlockSystem, K: list[np.ndarray], max_terms: int = 200, tol: float = 1e-10, patience: int = 3) -> BornResult:
    """x_{m+1} = L_0^{-1}(K + eps L_1 x_m) with measured contraction factors."""
    g = system.grid
    x = system.solve_L0(K)
    rows: list[BornRow] = []
    prev_inc = None
    streak = 0
    for m in range(1, max_terms + 1):
        if system.eps == 0.0:
            rows.append(BornRow(0.0, m, 0.0, 0.0))
            return BornResult(x, rows, True)
        step = system.apply_L1(x)
        x_new = system.solve_L0([kk + system.eps * q for kk, q in zip(K, step)])
        inc = slot_norm([a - c for a, c in zip(x_new, x)], g)
        rho = inc / prev_inc if prev_inc else float("nan")
        rows.append(BornRow(system.eps, m, inc, rho))
        x = x_new
        if inc <= tol * slot_norm(x, g):
            return BornResult(x, rows, True)
        streak = streak + 1 if (np.isfinite(rho) and rho >= 1.0) else 0
        if streak >= patience:
            raise DivergentBornSeries(f"contraction factor >= 1 for {patience} iterations at eps={system.eps}", rows)
        prev_inc = inc
    return BornResult(x, rows, False)


def standard_born_problem(grid: TorusGrid, s: int = 2, scale: float = 0.5):
    """Coefficient jets, sources and known slots for the Born sweeps."""
    xn = grid.coords()[-1]
    n = grid.n
    b = [np.zeros((n + 1, n + 1) + grid.shape) for _ in range(s + 1)]
    for i in range(1, n + 1):
        b[0][i, i] = scale * (1 + 0.3 * np.cos(np.pi * xn))
        b[1][i, i] = 0.2 * scale * np.sin(np.pi * xn)
    b[0][0, 0] = 0.3 * scale * np.cos(np.pi * xn)
    sources = [np.cos(np.pi * xn) if k % 2 == 0 else np.sin(np.pi * xn) for k in range(s)]
    known = [0.1 * np.sin(np.pi * xn), np.zeros(grid.shape)]
    return b, sources, known


@dataclass(frozen=True)
class SweepRow:
    eps: float
    status: str
    iterations: int
    rho_hat: float


def born_sweep(grid: TorusGrid, eps_values, s: int = 2, psi: GridFunction | None = None, tol: float = 1e-10) -> list[SweepRow]:
    """One row per eps: converged, divergent or exhausted, with the final contraction estimate."""
    psi = standard_psi(grid) if psi is None else psi
    b, sources, known = standard_born_problem(grid, s)
    rows = []
    for eps in eps_values:
        system = assemble_block_system(b, psi, s, float(eps), grid)
        try:
            res = born_solve(system, system.rhs(sources, known), tol=tol)
            status = "converged" if res.converged else "exhausted"
            rows.append(SweepRow(float(eps), status, len(res.diagnostics), res.rho_hat))
        except DivergentBornSeries as exc:
            rho = [r.rho_hat for r in exc.diagnostics if np.isfinite(r.rho_hat)]
            rows.append(SweepRow(float(eps), "DivergentBornSeries", len(exc.diagnostics), rho[-1] if rho else float("nan")))
    return rows


def geometric_fit(result: BornResult, skip: int = 3) -> tuple[float, float]:
    """Least-squares slope of ln(increment) against iteration and the RMS residual."""
    rows = [r for r in result.diagnostics if r.iteration > skip and r.increment > 0]
    if len(rows) < 3:
        return float("nan"), float("nan")
    it = np.array([r.iteration for r in rows], dtype=float)
    y = np.log(np.array([r.increment for r in rows]))
    coef = np.polyfit(it, y, 1)
    resid = y - np.polyval(coef, it)
    return float(coef[0]), float(np.sqrt(np.mean(resid * resid)))
