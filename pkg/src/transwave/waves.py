"""Leapfrog integration of the linear transmission wave equation.

The equation is stepped in expanded form

    A00 u_tt + 2 A0i d_i u_t + Aij d_i d_j u + (d_mu A^{mu nu}) d_nu u - psi u = S

with the same centered space stencils used for the compatibility jets.  The
u_t term multiplying the coefficient divergence is taken centered in time and
solved pointwise; the mixed term d_i u_t uses a second-order backward
difference of the spatial gradient so the update stays explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, factorial
from typing import Callable, Sequence

import numpy as np

from .grid import GridFunction, TorusGrid, fd_weights, indicator, periodic_derivative
from .norms import NormSpec, energy_base, energy_norm

CFL_FACTOR = 0.4


class CFLViolation(ValueError):
    pass


class SolverBlowup(RuntimeError):
    def __init__(self, message: str, step: int, time: float):
        super().__init__(message)
        self.step = step
        self.time = time


def _array(x) -> np.ndarray:
    return x.data if isinstance(x, GridFunction) else np.asarray(x, dtype=float)


def _as_callable(x) -> Callable[[float], np.ndarray]:
    if x is None:
        return None
    if callable(x):
        return x
    arr = np.asarray(x, dtype=float)
    return lambda t: arr


@dataclass
class LinearProblem:
    """Frozen-coefficient problem on the torus.

    ``coefficients(t)`` returns A^{mu nu}(t, .) with shape (n+1, n+1, *grid).
    The total source is F + chi H + sum_l t^l / l! mu_l.  ``initial`` holds
    the data jet u_0, u_1, ... (at least two entries).
    """

    grid: TorusGrid
    coefficients: Callable[[float], np.ndarray] | np.ndarray
    source: Callable[[float], np.ndarray] | np.ndarray | None
    initial: Sequence
    T: float
    psi: np.ndarray | float | None = None
    coeff_dt: Callable[[float], np.ndarray] | None = None
    interface_source: Callable[[float], np.ndarray] | np.ndarray | None = None
    mu: Sequence[np.ndarray] = ()
    damping: float = 0.0
    gamma: float = 1.0
    kappa: float = 1.0
    dt: float | None = None
    startup: str = "jet"
    level_one: np.ndarray | None = None
    snapshot_stride: int = 1
    s: int | None = None

    def __post_init__(self):
        self.coefficients = _as_callable(self.coefficients)
        self.source = _as_callable(self.source)
        self.interface_source = _as_callable(self.interface_source)
        self.initial = [_array(u) for u in self.initial]
        if len(self.initial) < 2:
            raise ValueError("initial data needs u_0 and u_1")
        self.psi = np.zeros(self.grid.shape) if self.psi is None else np.broadcast_to(_array(self.psi), self.grid.shape)
        self.mu = [_array(m) for m in self.mu]
        if self.startup not in ("jet", "naive"):
            raise ValueError(f"unknown startup {self.startup!r}")
        limit = CFL_FACTOR * self.grid.h * np.sqrt(self.kappa / self.gamma)
        if self.dt is None:
            steps = max(1, ceil(self.T / limit - 1e-9))
            self.dt = self.T / steps
        if self.dt > limit * (1 + 1e-12):
            raise CFLViolation(f"dt = {self.dt:.4g} exceeds {CFL_FACTOR} h sqrt(kappa/gamma) = {limit:.4g}")
        self.steps = int(round(self.T / self.dt))
        if abs(self.steps * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError("T must be an integer multiple of dt")
        self.chi = indicator(self.grid).data
        if self.s is None:
            self.s = len(self.initial) - 1

    def total_source(self, t: float) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        if self.source is not None:
            out = out + self.source(t)
        if self.interface_source is not None:
            out = out + self.chi * self.interface_source(t)
        for ell, m in enumerate(self.mu):
            out = out + t**ell / factorial(ell) * m
        return out

    def A(self, t: float) -> np.ndarray:
        return np.broadcast_to(self.coefficients(t), (self.grid.n + 1,) * 2 + self.grid.shape)

    def A_dt(self, t: float) -> np.ndarray:
        if self.coeff_dt is not None:
            return np.broadcast_to(self.coeff_dt(t), (self.grid.n + 1,) * 2 + self.grid.shape)
        return (self.A(t + self.dt) - self.A(t - self.dt)) / (2 * self.dt)

    def taylor_level(self, t: float) -> np.ndarray:
        jets = self.initial if self.startup == "jet" else self.initial[:2]
        out = np.zeros(self.grid.shape)
        for ell, u in enumerate(jets):
            out = out + t**ell / factorial(ell) * u
        return out


@dataclass
class StepState:
    t: float
    u: np.ndarray
    prev: np.ndarray
    prev2: np.ndarray


def _d(u: np.ndarray, i: int, h: float) -> np.ndarray:
    return periodic_derivative(u, i, h, 1)


def _dd(u: np.ndarray, i: int, j: int, h: float) -> np.ndarray:
    if i == j:
        return periodic_derivative(u, i, h, 2)
    return _d(_d(u, i, h), j, h)


def divergence(A: np.ndarray, A_dt: np.ndarray, h: float) -> list[np.ndarray]:
    """d_mu A^{mu nu} for each nu."""
    n = A.shape[0] - 1
    out = []
    for nu in range(n + 1):
        div = A_dt[0, nu]
        for i in range(n):
            div = div + _d(A[1 + i, nu], i, h)
        out.append(div)
    return out


def spatial_part(u: np.ndarray, grad_t: list[np.ndarray], A: np.ndarray, div: list[np.ndarray], psi: np.ndarray, S: np.ndarray, h: float) -> np.ndarray:
    """Everything except A00 u_tt and the div^0 u_t term."""
    n = A.shape[0] - 1
    rest = np.zeros_like(u)
    for i in range(n):
        rest = rest + (A[0, 1 + i] + A[1 + i, 0]) * grad_t[i]
        for j in range(n):
            rest = rest + A[1 + i, 1 + j] * _dd(u, i, j, h)
    for i in range(n):
        rest = rest + div[1 + i] * _d(u, i, h)
    return rest - psi * u - S


def step(state: StepState, problem: LinearProblem, dt: float | None = None) -> StepState:
    """Advance (u^{k-2}, u^{k-1}, u^k) at t_k to u^{k+1}."""
    dt = problem.dt if dt is None else dt
    g, h, t = problem.grid, problem.grid.h, state.t
    A = problem.A(t)
    div = divergence(A, problem.A_dt(t), h)
    div0 = div[0] - problem.damping
    n = g.n
    mixed = any(np.any(A[0, 1 + i] != 0) or np.any(A[1 + i, 0] != 0) for i in range(n))
    if mixed:
        grad_t = [(3 * _d(state.u, i, h) - 4 * _d(state.prev, i, h) + _d(state.prev2, i, h)) / (2 * dt) for i in range(n)]
    else:
        grad_t = [0.0] * n
    rest = spatial_part(state.u, grad_t, A, div, problem.psi, problem.total_source(t), h)
    a00 = A[0, 0]
    lhs = a00 / dt**2 + div0 / (2 * dt)
    rhs = a00 * (2 * state.u - state.prev) / dt**2 + div0 * state.prev / (2 * dt) - rest
    new = rhs / lhs
    return StepState(t + dt, new, state.u, state.prev)


# --------------------------------------------------------------- tracing


@dataclass
class Trajectory:
    grid: TorusGrid
    times: np.ndarray
    values: np.ndarray
    velocities: np.ndarray
    dt: float
    jets: list[list[np.ndarray]] = field(default_factory=list)

    def at(self, k: int) -> np.ndarray:
        return self.values[k]


@dataclass
class EnergyTrace:
    times: np.ndarray
    energy: np.ndarray
    discrete: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    snapshot_times: np.ndarray
    high: np.ndarray
    lower: np.ndarray

    def as_records(self) -> list[dict]:
        return [
            {"t": float(t), "E": float(e), "discrete": float(q), "d1": float(a), "d2": float(b), "d3": float(c)}
            for t, e, q, a, b, c in zip(self.times, self.energy, self.discrete, self.d1, self.d2, self.d3)
        ]


def discrete_energy(u_next: np.ndarray, u: np.ndarray, A: np.ndarray, psi: np.ndarray, grid: TorusGrid, dt: float) -> float:
    """Staggered leapfrog energy at t_{k+1/2}; conserved for constant coefficients."""
    h = grid.h
    v = (u_next - u) / dt
    total = np.sum(-A[0, 0] * v * v) + np.sum(psi * u_next * u)
    for i in range(grid.n):
        dp_next = (np.roll(u_next, -1, i) - u_next) / h
        dp = (np.roll(u, -1, i) - u) / h
        total = total + np.sum(A[1 + i, 1 + i] * dp_next * dp)
    return float(total * grid.cell_volume)


def _l2(u: np.ndarray, grid: TorusGrid) -> float:
    return float(np.sqrt(np.sum(u * u) * grid.cell_volume))


def _backward_jet(levels: list[np.ndarray], dt: float, order: int) -> list[np.ndarray]:
    """Time derivatives 0..order at the newest level from one-sided differences."""
    K = len(levels)
    jet = [levels[-1]]
    for r in range(1, order + 1):
        pts = min(K, r + 2)
        w = fd_weights(list(range(-pts + 1, 1)), r)
        acc = np.zeros_like(levels[-1])
        for k, wk in enumerate(w):
            acc = acc + wk * levels[K - pts + k]
        jet.append(acc / dt**r)
    return jet


def solve_linear(problem: LinearProblem, track_high: bool = True, blowup_window: int = 10) -> tuple[Trajectory, EnergyTrace]:
    """Step from t = 0 to T and record snapshots plus the energy trace."""
    g, dt = problem.grid, problem.dt
    u0 = problem.initial[0].copy()
    u1 = problem.level_one if problem.level_one is not None else problem.taylor_level(dt)
    um1 = problem.taylor_level(-dt)
    state = StepState(dt, np.asarray(u1, dtype=float), u0, um1)
    levels = [um1, u0, state.u]

    snap_t, snap_u, snap_v, jets = [0.0], [u0], [problem.initial[1].copy()], []
    times, energy, disc, d1, d2, d3 = [], [], [], [], [], []
    high_t, high, lower = [], [], []
    s = problem.s

    def record(t, u, v, u_next, A, Adt, S):
        times.append(t)
        energy.append(energy_base(u, v, g))
        disc.append(discrete_energy(u_next, u, A, problem.psi, g, dt))
        div = divergence(A, Adt, g.h)
        q = max(float(np.max(np.abs(d))) for d in div) + float(np.max(np.abs(problem.psi))) + abs(problem.damping)
        d1.append((1 + q) * _l2(u, g))
        d2.append(1.0 + float(np.max(np.abs(Adt))) + q)
        d3.append(_l2(S, g))

    def check(k):
        e = energy[-1]
        if not np.isfinite(e) or not np.all(np.isfinite(state.u)):
            raise SolverBlowup("non-finite values in the solution", k, times[-1])
        if len(energy) > 3 * blowup_window and e > 1e-8 and e > 2 * energy[-1 - blowup_window] > 0:
            raise SolverBlowup("energy doubled within the blow-up window", k, times[-1])

    def snapshot(st):
        vk = (3 * st.u - 4 * st.prev + st.prev2) / (2 * dt)
        snap_t.append(st.t)
        snap_u.append(st.u)
        snap_v.append(vk)
        if track_high and s >= 1 and len(levels) >= s + 2:
            jet = _backward_jet(levels, dt, s)
            jets.append(jet)
            high_t.append(st.t)
            high.append(energy_norm(jet, NormSpec("E_s", s), g).value)
            lower.append(energy_norm(jet[:s], NormSpec("Ec_s", s - 1), g).value if s >= 2 else energy_base(jet[0], jet[1], g))

    if problem.snapshot_stride == 1 or problem.steps == 1:
        snap_t.append(dt)
        snap_u.append(state.u)
        snap_v.append((3 * state.u - 4 * u0 + um1) / (2 * dt))
    A0 = problem.A(0.0)
    record(0.0, u0, problem.initial[1], state.u, A0, problem.A_dt(0.0), problem.total_source(0.0))
    for k in range(1, problem.steps):
        t = state.t
        A = problem.A(t)
        Adt = problem.A_dt(t)
        new = step(state, problem)
        v = (3 * state.u - 4 * state.prev + state.prev2) / (2 * dt)
        record(t, state.u, v, new.u, A, Adt, problem.total_source(t))
        check(k)
        state = new
        levels.append(state.u)
        if len(levels) > s + 3:
            levels.pop(0)
        level = k + 1
        if level % problem.snapshot_stride == 0 or level == problem.steps:
            snapshot(state)
    traj = Trajectory(g, np.array(snap_t), np.stack(snap_u), np.stack(snap_v), dt, jets)
    trace = EnergyTrace(np.array(times), np.array(energy), np.array(disc), np.array(d1), np.array(d2), np.array(d3),
                        np.array(high_t), np.array(high), np.array(lower))
    return traj, trace


# ------------------------------------------------------ estimate monitor


def _estimate_parts(trace: EnergyTrace):
    t, E = trace.times, trace.energy
    integrand = trace.d2 * E + trace.d3
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))])
    return E, trace.d1, cum


def _pair_base(trace: EnergyTrace, stride: int):
    E, d1, cum = _estimate_parts(trace)
    idx = np.arange(0, len(E), stride)
    E, d1, cum = E[idx], d1[idx], cum[idx]
    base = E[:, None] + d1[:, None] + (cum[None, :] - cum[:, None])
    lhs = np.broadcast_to(E[None, :], base.shape)
    upper = np.triu(np.ones(base.shape, dtype=bool), 1)
    return lhs, base, upper


def calibrate_estimate_constant(trace: EnergyTrace, safety: float = 4.0, stride: int = 1) -> float:
    """Smallest c making E(t2) <= c * RHS(t1, t2) on the trace, times ``safety``."""
    lhs, base, upper = _pair_base(trace, stride)
    ratio = np.where(upper & (base > 0), lhs / np.where(base > 0, base, 1.0), 0.0)
    return safety * float(ratio.max())


@dataclass(frozen=True)
class MarginReport:
    c: float
    margin: float
    worst_pair: tuple[float, float]
    pairs: int


def energy_estimate_check(trace: EnergyTrace, c: float, stride: int = 1) -> MarginReport:
    """min over t1 < t2 of c (E(t1) + d1(t1) + int (d2 E + d3)) - E(t2)."""
    lhs, base, upper = _pair_base(trace, stride)
    if not upper.any():
        return MarginReport(c, 0.0, (0.0, 0.0), 0)
    margin = np.where(upper, c * base - lhs, np.inf)
    i, j = np.unravel_index(np.argmin(margin), margin.shape)
    t = trace.times[::stride]
    return MarginReport(c, float(margin[i, j]), (float(t[i]), float(t[j])), int(upper.sum()))


# --------------------------------------------------- finite speed checker


@dataclass(frozen=True)
class LeakageReport:
    times: np.ndarray
    leakage: np.ndarray
    radius: float
    c_max: float

    @property
    def max_leakage(self) -> float:
        return float(self.leakage.max()) if self.leakage.size else 0.0


def _distance(grid: TorusGrid, centre: Sequence[float]) -> np.ndarray:
    d2 = np.zeros(grid.shape)
    for x, c in zip(grid.coords(), centre):
        off = np.mod(x - c + 1.0, 2.0) - 1.0
        d2 = d2 + off * off
    return np.sqrt(d2)


def speed_check(problem_a: LinearProblem, problem_b: LinearProblem, centre: Sequence[float], c_max: float) -> LeakageReport:
    """max |u_a - u_b| outside B_{r + c_max t}(centre), r the measured support radius of the data difference."""
    g = problem_a.grid
    if problem_b.grid != g or problem_a.dt != problem_b.dt:
        raise ValueError("speed_check needs a shared grid and time step")
    dist = _distance(g, centre)
    diff0 = sum(np.abs(a - b) for a, b in zip(problem_a.initial, problem_b.initial))
    support = diff0 > 0
    r = float(dist[support].max()) if support.any() else 0.0
    ta, _ = solve_linear(problem_a, track_high=False)
    tb, _ = solve_linear(problem_b, track_high=False)
    leak = []
    for k, t in enumerate(ta.times):
        outside = dist > r + c_max * t + 1e-12
        d = np.abs(ta.values[k] - tb.values[k])
        leak.append(float(d[outside].max()) if outside.any() else 0.0)
    return LeakageReport(ta.times, np.array(leak), r, c_max)
