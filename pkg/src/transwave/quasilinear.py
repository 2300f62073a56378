"""Picard iteration for the quasi-linear transmission problem and its monitors."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Sequence

import numpy as np

from .grid import GridFunction, TorusGrid, indicator, periodic_derivative
from .norms import NormSpec, energy_base, energy_norm
from .timejets import CoefficientModel, EllipticityViolation, Jet, compat_jets, flat_model
from .waves import CFL_FACTOR, LinearProblem, SolverBlowup, solve_linear


class NoConvergence(RuntimeError):
    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history


# ---------------------------------------------------------------- models


def linear_model(n: int = 1) -> CoefficientModel:
    """Flat coefficients with a fixed smooth source: the Picard map is constant."""
    base = flat_model(n)

    def F(U, dU):
        return 0.0 * U + 0.1

    return CoefficientModel("linear", n, base.A, F=F)


def small_model(n: int = 1) -> CoefficientModel:
    """A = diag(-1, 1 + U^2, ...) with the interface source H = d_t U / 2."""

    def A(U):
        z = 0.0 * U
        rows = []
        for a in range(n + 1):
            row = []
            for b in range(n + 1):
                if a != b:
                    row.append(z)
                elif a == 0:
                    row.append(z - 1.0)
                else:
                    row.append(1.0 + U * U)
            rows.append(row)
        return rows

    def H(U, dU):
        return 0.5 * dU[0]

    return CoefficientModel("small", n, A, H=H, gamma=2.0, kappa=1.0, params={"amplitude": 0.1})


def blowup_model(n: int = 1) -> CoefficientModel:
    """Flat A with F = -(d_t U)^2, i.e. U_tt = Delta U + U_t^2: gradients blow up in finite time."""
    base = flat_model(n)

    def F(U, dU):
        return -(dU[0] * dU[0])

    return CoefficientModel("blowup", n, base.A, F=F)


MODELS = {"flat": flat_model, "linear": linear_model, "small": small_model, "blowup": blowup_model}


def model_data(name: str, grid: TorusGrid) -> tuple[GridFunction, GridFunction]:
    """Standard initial data paired with each model."""
    x = grid.coords()
    xn = x[-1]
    if name == "small":
        u0, u1 = 0.1 * np.sin(np.pi * xn), 0.1 * np.cos(np.pi * xn)
    elif name == "blowup":
        u0, u1 = 0.0 * xn, 2.0 + 0.5 * np.cos(np.pi * xn)
    else:
        u0, u1 = np.sin(np.pi * xn), 0.0 * xn
    return GridFunction(grid, u0), GridFunction(grid, u1)


# ------------------------------------------------------------- iterates


@dataclass
class Iterate:
    """U at every step level t_k = k dt, k = 0..K, with its time derivative."""

    grid: TorusGrid
    dt: float
    values: np.ndarray
    velocities: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.shape[0])

    @property
    def T(self) -> float:
        return self.dt * (self.values.shape[0] - 1)


def _time_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    return np.gradient(values, dt, axis=0, edge_order=2)


def taylor_iterate(jet: Jet, dt: float, steps: int) -> Iterate:
    """Degree-s Taylor extension of the data jet."""
    arrs = jet.arrays()
    t = dt * np.arange(steps + 1)
    vals = np.zeros((steps + 1,) + jet.grid.shape)
    vel = np.zeros_like(vals)
    bshape = (-1,) + (1,) * jet.grid.n
    for ell, u in enumerate(arrs):
        vals = vals + (t**ell / factorial(ell)).reshape(bshape) * u
        if ell >= 1:
            vel = vel + (t ** (ell - 1) / factorial(ell - 1)).reshape(bshape) * u
    return Iterate(jet.grid, dt, vals, vel)


def x1_distance(a: Iterate, b: Iterate, stride: int = 1) -> float:
    """sup over snapshot times of the E-norm of the difference."""
    g = a.grid
    return max(
        energy_base(a.values[k] - b.values[k], a.velocities[k] - b.velocities[k], g)
        for k in range(0, a.values.shape[0], stride)
    )


def _steps_for(T: float, grid: TorusGrid, model: CoefficientModel) -> tuple[float, int]:
    limit = CFL_FACTOR * grid.h * np.sqrt(model.kappa / model.gamma)
    steps = max(1, int(np.ceil(T / limit - 1e-9)))
    return T / steps, steps


def picard_map(U: Iterate, model: CoefficientModel, jet: Jet, check: bool = True) -> Iterate:
    """Z = J_T(U): solve the linear problem with coefficients and sources frozen along U."""
    g, dt = U.grid, U.dt
    h, n = g.h, g.n
    chi = indicator(g).data
    K = U.values.shape[0] - 1
    A_levels = np.stack([model.matrix(u) for u in U.values])
    if check:
        model.check_state(U.values)
    A_dt = _time_derivative(A_levels, dt) if K >= 2 else np.zeros_like(A_levels)
    src = np.empty_like(U.values)
    for k in range(K + 1):
        u = U.values[k]
        dU = [U.velocities[k]] + [periodic_derivative(u, i, h, 1) for i in range(n)]
        src[k] = np.asarray(model.F(u, dU) + chi * model.H(u, dU), dtype=float)

    def index(t: float) -> int:
        return min(K, max(0, int(round(t / dt))))

    prob = LinearProblem(
        g,
        lambda t: A_levels[index(t)],
        lambda t: src[index(t)],
        jet.arrays(),
        T=U.T,
        coeff_dt=lambda t: A_dt[index(t)],
        gamma=model.gamma,
        kappa=model.kappa,
        dt=dt,
    )
    traj, _ = solve_linear(prob, track_high=False)
    return Iterate(g, dt, traj.values, _time_derivative(traj.values, dt))


@dataclass(frozen=True)
class IterationState:
    index: int
    T: float
    R: float
    high: float
    distance: float
    ratio: float | None


@dataclass
class QuasilinearResult:
    solution: Iterate
    history: list[IterationState]
    T: float
    converged: bool
    jet: Jet
    restarts: int = 0

    @property
    def ratios(self) -> list[float]:
        return [st.ratio for st in self.history if st.ratio is not None and st.T == self.T]


def high_norm(U: Iterate, order: int, stride: int = 4) -> float:
    """sup_t E^{order}(t) with time derivatives from repeated centered differences."""
    derivs = [U.values, U.velocities]
    while len(derivs) <= order:
        derivs.append(_time_derivative(derivs[-1], U.dt))
    best = 0.0
    for k in range(0, U.values.shape[0], stride):
        jet = [d[k] for d in derivs]
        best = max(best, energy_norm(jet, NormSpec("E_s", order), U.grid).value)
    return best


def seeded_iterate(jet: Jet, dt: float, steps: int, seed: int | None, scale: float = 0.01) -> Iterate:
    """Taylor extension plus a smooth perturbation vanishing to order s+1 at t = 0."""
    base = taylor_iterate(jet, dt, steps)
    if seed is None:
        return base
    g = jet.grid
    rng = np.random.default_rng(seed)
    xn = g.coords()[-1]
    bump = np.zeros(g.shape)
    for k in range(1, 4):
        a, b = rng.normal(size=2)
        bump = bump + (a * np.cos(k * np.pi * xn) + b * np.sin(k * np.pi * xn)) / k**2
    p = jet.order + 1
    T = dt * steps
    t = dt * np.arange(steps + 1)
    bshape = (-1,) + (1,) * g.n
    prof = ((t / T) ** p).reshape(bshape)
    dprof = (p * t ** (p - 1) / T**p).reshape(bshape)
    return Iterate(g, dt, base.values + scale * prof * bump, base.velocities + scale * dprof * bump)


def solve_quasilinear(model: CoefficientModel, data: tuple[GridFunction, GridFunction], T: float, R: float | None = None,
                      tol: float = 1e-10, max_iter: int = 40, s: int = 3, seed: int | None = None,
                      contraction_cap: float = 1.0, track_high: bool = True) -> QuasilinearResult:
    """Iterate U_{n+1} = J_T(U_n), halving T whenever a contraction ratio reaches the cap."""
    jet = compat_jets(data[0], data[1], model, s)
    g = jet.grid
    history: list[IterationState] = []
    restarts = 0
    if R is None:
        R = 4.0 * energy_norm(compat_jets(data[0], data[1], model, s + 1).arrays(), NormSpec("E_s", s + 1), g).value + 1.0
    while True:
        dt, steps = _steps_for(T, g, model)
        if steps < 10:
            raise NoConvergence(f"horizon T={T:.4g} fell below 10 time steps", history)
        U = seeded_iterate(jet, dt, steps, seed)
        prev = None
        restart = False
        for it in range(max_iter):
            try:
                Z = picard_map(U, model, jet)
            except (SolverBlowup, EllipticityViolation):
                restart = True
                break
            d = x1_distance(Z, U)
            hi = high_norm(Z, s + 1) if track_high else float("nan")
            ratio = None if prev is None or d < tol else d / prev
            history.append(IterationState(it, T, R, hi, d, ratio))
            if not np.isfinite(d) or (ratio is not None and ratio >= contraction_cap):
                restart = True
                break
            U = Z
            if d < tol:
                return QuasilinearResult(Z, history, T, True, jet, restarts)
            prev = d
        if not restart:
            raise NoConvergence(f"no convergence within {max_iter} iterations", history)
        T = T / 2
        restarts += 1


@dataclass(frozen=True)
class UniquenessReport:
    distances: np.ndarray
    max_distance: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_distance <= 10 * self.tol


def uniqueness_probe(model: CoefficientModel, data, T: float, seeds: tuple[int | None, int | None] = (None, 1),
                     tol: float = 1e-10, s: int = 3) -> UniquenessReport:
    """E-distance between two solves started from different seeds, at every step level."""
    a = solve_quasilinear(model, data, T, tol=tol, s=s, seed=seeds[0], track_high=False)
    b = solve_quasilinear(model, data, a.T, tol=tol, s=s, seed=seeds[1], track_high=False)
    K = min(a.solution.values.shape[0], b.solution.values.shape[0])
    g = a.solution.grid
    d = np.array([
        energy_base(a.solution.values[k] - b.solution.values[k], a.solution.velocities[k] - b.solution.velocities[k], g)
        for k in range(K)
    ])
    return UniquenessReport(d, float(d.max()), tol)


# ---------------------------------------------------------- continuation

VERDICTS = ("Continuable", "BlowupSuspected", "Inconclusive")


def comparison_matrix(s: int, delta: float, C: float, c: float = 1.0) -> np.ndarray:
    """Scalar comparison matrix M_delta of the continuation argument."""
    if s < 2:
        raise ValueError("the comparison matrix needs s >= 2")
    M = np.eye(s)
    M[0, 0] = M[1, 1] = 1.0 - delta * C
    for k in range(2, s):
        M[k, 0] = M[k, 1] = -delta * C
    for k in range(s - 2):
        M[k, k + 2] = c
    return M


def smallest_singular_value(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False)[-1])


@dataclass
class ContinuationReport:
    times: np.ndarray
    w1inf: np.ndarray
    high: np.ndarray
    sigma_min: float
    delta0: float
    growth_rate: float
    verdict: str
    C: float
    windows: int = 0
    note: str = ""


def w1inf_norm(u: np.ndarray, ut: np.ndarray, grid: TorusGrid) -> float:
    vals = [np.max(np.abs(u)), np.max(np.abs(ut))]
    vals += [np.max(np.abs(periodic_derivative(u, i, grid.h, 1))) for i in range(grid.n)]
    return float(max(vals))


def continuation_monitor(segments: Sequence[Iterate], model: CoefficientModel, delta: float, s: int = 3,
                         cap: float = 10.0, rate_cap: float = 5.0, floor: float = 0.5, failed: bool = False,
                         stride: int = 4) -> ContinuationReport:
    """Track W^{1,inf} and E^{s+1} along a (windowed) run and assemble M_delta."""
    times, w, hi = [], [], []
    offset = 0.0
    for seg in segments:
        derivs = [seg.values, seg.velocities]
        while len(derivs) <= s + 1:
            derivs.append(_time_derivative(derivs[-1], seg.dt))
        for k in range(0, seg.values.shape[0], stride):
            times.append(offset + k * seg.dt)
            w.append(w1inf_norm(seg.values[k], seg.velocities[k], seg.grid))
            hi.append(energy_norm([d[k] for d in derivs], NormSpec("E_s", s + 1), seg.grid).value)
        offset += seg.T
    times, w, hi = np.array(times), np.array(w), np.array(hi)
    C = float(w.max()) if w.size else 0.0
    sig = smallest_singular_value(comparison_matrix(s, delta, C))
    delta0 = 0.0
    for j in range(0, 30):
        d = 2.0**-j
        if smallest_singular_value(comparison_matrix(s, d, C)) >= floor:
            delta0 = d
            break
    rate = 0.0
    if times.size >= 2 and np.all(hi > 0):
        rate = float(np.polyfit(times, np.log(hi), 1)[0])
    exceeded = np.nonzero(w > cap)[0]
    if exceeded.size or failed:
        verdict = "BlowupSuspected"
    elif rate < rate_cap and sig >= floor:
        verdict = "Continuable"
    else:
        verdict = "Inconclusive"
    return ContinuationReport(times, w, hi, sig, delta0, rate, verdict, C, len(segments))


@dataclass
class WindowedRun:
    segments: list[Iterate]
    results: list[QuasilinearResult]
    failed: bool
    reason: str = ""

    @property
    def horizon(self) -> float:
        return float(sum(seg.T for seg in self.segments))


def continue_solution(model: CoefficientModel, data, T_total: float, window: float, s: int = 3, tol: float = 1e-10,
                      cap: float = 10.0, max_windows: int = 200) -> WindowedRun:
    """Chain Picard solves over windows, restarting from the end state of each."""
    g = data[0].grid
    u0, u1 = data
    segments, results = [], []
    elapsed = 0.0
    for _ in range(max_windows):
        if elapsed >= T_total - 1e-12:
            return WindowedRun(segments, results, False)
        try:
            res = solve_quasilinear(model, (u0, u1), min(window, T_total - elapsed), tol=tol, s=s, track_high=False)
        except NoConvergence as exc:
            return WindowedRun(segments, results, True, str(exc))
        seg = res.solution
        segments.append(seg)
        results.append(res)
        elapsed += seg.T
        if w1inf_norm(seg.values[-1], seg.velocities[-1], g) > cap:
            return WindowedRun(segments, results, True, "W^{1,inf} cap exceeded")
        u0 = GridFunction(g, seg.values[-1])
        u1 = GridFunction(g, seg.velocities[-1])
    return WindowedRun(segments, results, False, "window budget exhausted")
