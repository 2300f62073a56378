"""The twelve acceptance checks, shared by the test-suite and the command line."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import factorial
from typing import Callable

import numpy as np

from .elliptic import (
    DivergentBornSeries,
    assemble_block_system,
    born_solve,
    born_sweep,
    geometric_fit,
    regularity_gain_check,
    standard_born_problem,
    standard_psi,
)
from .grid import GridFunction, cutoff_phi, indicator, make_grid, periodic_derivative
from .norms import energy_base
from .quasilinear import (
    continuation_monitor,
    continue_solution,
    model_data,
    blowup_model,
    small_model,
    solve_quasilinear,
    uniqueness_probe,
)
from .timejets import InterfaceProblem, compat_jets, flat_model, linear_jets, mu_sources, project_to_torus, scaling_check
from .waves import LinearProblem, calibrate_estimate_constant, energy_estimate_check, solve_linear, speed_check


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    runtime: float
    limit: float | None
    details: dict = field(default_factory=dict)

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ", ".join(f"{k}={_short(v)}" for k, v in self.details.items())
        return f"{status} [{self.number:2d}] {self.name} ({self.runtime:.2f}s) {extra}"


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _timed(number: int, name: str, limit: float | None, fn: Callable[[], tuple[bool, dict]]) -> Criterion:
    t0 = time.perf_counter()
    ok, details = fn()
    dt = time.perf_counter() - t0
    within = limit is None or dt < limit
    if not within:
        details["runtime_exceeded"] = True
    return Criterion(number, name, bool(ok and within), dt, limit, details)


def flat_matrix(grid, diag=None) -> np.ndarray:
    n1 = grid.n + 1
    A = np.zeros((n1, n1) + grid.shape)
    A[0, 0] = -1.0
    for i in range(1, n1):
        A[i, i] = 1.0 if diag is None else diag
    return A


# ------------------------------------------------------------------ 1


def jets_oracle(N: int = 64, s: int = 4) -> tuple[bool, dict]:
    g = make_grid(1, N)
    x = g.coords()[0]
    u0 = GridFunction(g, np.sin(2 * np.pi * x))
    u1 = GridFunction(g, np.cos(2 * np.pi * x))
    jet = compat_jets(u0, u1, flat_model(1), s)
    worst = 0.0
    for ell in range(s - 1):
        oracle = periodic_derivative(jet[ell].data, 0, g.h, 2)
        worst = max(worst, float(np.max(np.abs(jet[ell + 2].data - oracle)) / np.max(np.abs(oracle))))
    return worst <= 1e-12, {"max_relative_error": worst}


def criterion_1() -> Criterion:
    return _timed(1, "compatibility jets match the flat recursion", 1.0, jets_oracle)


# ------------------------------------------------------------------ 2


def standard_interface_problem(N: int = 64) -> InterfaceProblem:
    g = make_grid(1, N)
    x = g.coords()[0]
    b = np.zeros((2, 2, N))
    b[1, 1] = 0.2 * np.cos(np.pi * x)
    b1 = np.zeros((2, 2, N))
    b1[1, 1] = 0.1 * np.sin(np.pi * x)
    return InterfaceProblem(
        g, np.diag([-1.0, 1.0]), (b, b1), 0.5,
        (np.sin(np.pi * x),), (np.cos(np.pi * x),),
        (np.sin(2 * np.pi * x), np.cos(np.pi * x)),
    )


def mu_localization(N: int = 64, s: int = 3) -> tuple[bool, dict]:
    prob = standard_interface_problem(N)
    g = prob.grid
    res = mu_sources(prob, cutoff_phi(g, 1.0).data, standard_psi(g).data, s)
    box = np.max(np.abs(np.stack(g.coords())), axis=0) <= res.eta0 + 1e-12
    exact = all(np.all(m[box] == 0.0) for m in res.mu)
    return exact and res.eta0 >= 4 * g.h, {"eta0": res.eta0, "four_h": 4 * g.h, "exact_zero": exact}


def criterion_2() -> Criterion:
    return _timed(2, "correction sources vanish exactly on a measured box", 5.0, mu_localization)


# ------------------------------------------------------------------ 3


def mms_problem(N: int, startup: str = "jet", phase: float = 0.0, T: float = 1.0, s: int = 4):
    """U* = sin(t + phase) cos(2 pi x) with A = diag(-1, 1 + sin^2(pi x) / 4)."""
    g = make_grid(1, N)
    x = g.coords()[0]
    k = 2 * np.pi
    a = 1 + 0.25 * np.sin(np.pi * x) ** 2
    da = 0.25 * np.pi * np.sin(2 * np.pi * x)
    space = np.cos(k * x)
    # d_x(a d_x cos) - d_tt term: F = sin(t+p) [cos - k da sin - k^2 a cos]
    profile = space - k * da * np.sin(k * x) - k * k * a * space

    def source(t):
        return np.sin(t + phase) * profile

    src = np.stack([profile * np.sin(phase + j * np.pi / 2) / factorial(j) for j in range(s + 1)])
    A = flat_matrix(g, a)
    jets = linear_jets(np.sin(phase) * space, np.cos(phase) * space, g, A[None], src, s)
    prob = LinearProblem(g, A, source, jets, T=T, startup=startup)

    def exact(t):
        return np.sin(t + phase) * space, np.cos(t + phase) * space

    return prob, exact


def mms_error(N: int, startup: str = "jet", phase: float = 0.0) -> float:
    prob, exact = mms_problem(N, startup, phase)
    traj, _ = solve_linear(prob, track_high=False)
    u, ut = exact(traj.times[-1])
    return energy_base(traj.values[-1] - u, traj.velocities[-1] - ut, prob.grid)


def observed_orders(errors) -> list[float]:
    return [float(np.log2(errors[i] / errors[i + 1])) for i in range(len(errors) - 1)]


def solver_order(resolutions=(32, 64, 128)) -> tuple[bool, dict]:
    errs = [mms_error(N) for N in resolutions]
    orders = observed_orders(errs)
    ok = all(abs(p - 2.0) <= 0.2 for p in orders)
    # a shifted phase has u_tt(0) != 0, which exposes the first-order startup
    jet = [mms_error(N, "jet", 1.0) for N in resolutions]
    naive = [mms_error(N, "naive", 1.0) for N in resolutions]
    p_jet, p_naive = observed_orders(jet)[-1], observed_orders(naive)[-1]
    degraded = p_naive < p_jet - 0.05 and naive[-1] > 1.05 * jet[-1]
    return ok and degraded, {"orders": orders, "jet_order": p_jet, "naive_order": p_naive}


def criterion_3() -> Criterion:
    return _timed(3, "linear solver converges at second order", 30.0, solver_order)


# ------------------------------------------------------------------ 4


def _bump(x, centre, r):
    q = 1 - ((x - centre) / r) ** 2
    return np.where(q > 0, np.exp(-1.0 / np.where(q > 0, q, 1.0)), 0.0)


def speed_corpus(N: int = 64, T: float = 0.6):
    g = make_grid(1, N)
    x = g.coords()[0]
    base = [np.sin(np.pi * x), np.zeros(N)]
    pert = [base[0] + _bump(x, -0.5, 0.2), base[1]]
    a = 1 + 0.5 * np.sin(np.pi * x) ** 2
    cases = []
    for name, diag, gamma, c in (("flat", 1.0, 1.0, 1.0), ("variable", a, 2.0, float(np.sqrt(2.0 * a.max())))):
        A = flat_matrix(g, diag)
        pa = LinearProblem(g, A, None, base, T=T, gamma=gamma)
        pb = LinearProblem(g, A, None, pert, T=T, gamma=gamma)
        cases.append((name, pa, pb, c))
    return cases


def finite_speed(N: int = 64) -> tuple[bool, dict]:
    out, ok = {}, True
    for name, pa, pb, c in speed_corpus(N):
        rep = speed_check(pa, pb, [-0.5], c)
        grid_cone = speed_check(pa, pb, [-0.5], pa.grid.h / pa.dt)
        out[f"{name}_leak"] = rep.max_leakage
        out[f"{name}_stencil_cone_leak"] = grid_cone.max_leakage
        limit = 0.0 if name == "flat" else 1e-10
        ok = ok and rep.max_leakage <= limit
    return ok, out


def criterion_4() -> Criterion:
    return _timed(4, "perturbations stay inside the speed cone", 30.0, finite_speed)


# ------------------------------------------------------------------ 5


def standing_wave(N: int = 64, T: float = 2.0) -> LinearProblem:
    g = make_grid(1, N)
    x = g.coords()[0]
    return LinearProblem(g, flat_matrix(g), None, [np.sin(2 * np.pi * x), np.zeros(N)], T=T)


def estimate_corpus(N: int = 64) -> dict[str, LinearProblem]:
    g = make_grid(1, N)
    x = g.coords()[0]
    a = 1 + 0.5 * np.sin(np.pi * x) ** 2

    def moving(t):
        A = flat_matrix(g)
        A[1, 1] = 1 + 0.3 * np.sin(t) * np.cos(np.pi * x) ** 2
        return A

    def moving_dt(t):
        A = np.zeros((2, 2, N))
        A[1, 1] = 0.3 * np.cos(t) * np.cos(np.pi * x) ** 2
        return A

    ones = np.ones(N)
    projected = project_to_torus(standard_interface_problem(N), cutoff_phi(g, 1.0).data, standard_psi(g).data, 3)
    return {
        "standing": standing_wave(N),
        "variable": LinearProblem(g, flat_matrix(g, a), None, [np.sin(np.pi * x), np.cos(np.pi * x)], T=2.0, gamma=2.0),
        "moving": LinearProblem(g, moving, None, [np.cos(np.pi * x), np.zeros(N)], T=2.0, coeff_dt=moving_dt, gamma=2.0),
        "forced": mms_problem(N)[0],
        "interface_damped": LinearProblem(g, flat_matrix(g), None, [np.zeros(N), np.zeros(N)], T=2.0, interface_source=ones,
                                          damping=1.0, psi=standard_psi(g).data),
        "projected": projected.linear_problem(1.0),
    }


def calibrated_constant(N: int = 64) -> float:
    _, trace = solve_linear(standing_wave(N), track_high=False)
    return calibrate_estimate_constant(trace, safety=4.0)


def energy_estimate(N: int = 64) -> tuple[bool, dict]:
    c = calibrated_constant(N)
    out, ok = {"c": c}, True
    for name, prob in estimate_corpus(N).items():
        _, trace = solve_linear(prob, track_high=False)
        rep = energy_estimate_check(trace, c)
        out[name] = rep.margin
        ok = ok and rep.margin >= 0
    return ok, out


def criterion_5() -> Criterion:
    return _timed(5, "weak energy estimate holds with the frozen constant", 60.0, energy_estimate)


# ------------------------------------------------------------------ 6

BORN_EPS = (0.1, 0.2, 0.4, 0.8, 1.6, 3.2)


def born_mechanism(N: int = 64, s: int = 2) -> tuple[bool, dict]:
    g = make_grid(1, N)
    rows = born_sweep(g, BORN_EPS, s)
    by_eps = {r.eps: r for r in rows}
    scale = by_eps[0.4].rho_hat / by_eps[0.2].rho_hat
    linear = abs(scale / 2.0 - 1.0) <= 0.2
    div = [r.eps for r in rows if r.status == "DivergentBornSeries"]
    threshold = min(div) if div else float("nan")
    clean = bool(div) and all(r.status == "converged" for r in rows if r.eps < threshold)
    b, sources, known = standard_born_problem(g, s)
    system = assemble_block_system(b, standard_psi(g), s, threshold / 2, g)
    try:
        res = born_solve(system, system.rhs(sources, known))
        slope, resid = geometric_fit(res)
        geometric = res.converged and slope < 0 and resid <= 0.1
    except DivergentBornSeries:
        slope, resid, geometric = float("nan"), float("nan"), False
    return linear and clean and geometric, {
        "doubling_ratio": scale, "threshold": threshold, "half_threshold_slope": slope, "fit_residual": resid,
    }


def criterion_6() -> Criterion:
    return _timed(6, "Born series contraction and divergence threshold", 60.0, born_mechanism)


# ------------------------------------------------------------------ 7


def picard_contraction(N: int = 64, T0: float = 2.0) -> tuple[bool, dict]:
    g = make_grid(1, N)
    model, data = small_model(1), model_data("small", g)
    auto = solve_quasilinear(model, data, T0, track_high=True)
    ratios = auto.ratios
    half = solve_quasilinear(model, data, auto.T / 2, track_high=False)
    inflation = auto.ratios[0] / half.ratios[0]
    ball = all(st.high <= st.R for st in auto.history if st.T == auto.T)
    ok = auto.converged and all(r <= 0.5 for r in ratios) and 1.5 <= inflation <= 3.0 and ball
    return ok, {"T": auto.T, "ratios": ratios, "r1_inflation": inflation, "in_ball": ball}


def criterion_7() -> Criterion:
    return _timed(7, "Picard map contracts at the auto-selected horizon", 120.0, picard_contraction)


# ------------------------------------------------------------------ 8


def uniqueness(N: int = 64, tol: float = 1e-10) -> tuple[bool, dict]:
    g = make_grid(1, N)
    rep = uniqueness_probe(small_model(1), model_data("small", g), 1.0, seeds=(None, 1), tol=tol)
    return rep.passed, {"max_distance": rep.max_distance, "bound": 10 * tol}


def criterion_8() -> Criterion:
    return _timed(8, "differently seeded solves agree", 120.0, uniqueness)


# ------------------------------------------------------------------ 9

SCALING_DELTAS = (1.0, 0.5, 0.25)


def scaling_cases():
    return (
        ("f_sigma", 0, "box", lambda x, chi: np.sin(np.pi * x) + 0.3 * x * x),
        ("g_ell", 1, "box", lambda x, chi: np.cos(2 * np.pi * x)),
        ("h_ell", 1, "box", lambda x, chi: x**3 * chi),
        ("h_ell", 1, "half_box", lambda x, chi: x**3 * chi + np.cos(np.pi * x)),
    )


def scaling_stability(resolutions=(32, 64), s: int = 3) -> tuple[bool, dict]:
    out, ok = {}, True
    for role, ell, dom, fn in scaling_cases():
        table = []
        for N in resolutions:
            fine = make_grid(1, 4 * N)
            x = fine.coords()[0]
            rows = scaling_check(fn(x, indicator(fine).data), fine, role, SCALING_DELTAS, s, ell, N, dom)
            table.append([r.ratio for r in rows])
        worst = 1.0
        for a, b in zip(table[0], table[1]):
            if a == 0.0 and b == 0.0:
                continue
            q = max(a, b) / min(a, b) if min(a, b) > 0 else np.inf
            worst = max(worst, q)
        out[f"{role}_{dom}"] = worst
        ok = ok and worst <= 2.0
    return ok, out


def criterion_9() -> Criterion:
    return _timed(9, "rescaling ratios are grid stable", 30.0, scaling_stability)


# ----------------------------------------------------------------- 10

GAIN_CORPUS = (
    lambda x: 1.0 + 0.0 * x,
    lambda x: x,
    lambda x: x * x - x,
    lambda x: x**3,
    lambda x: (1 - x) * x * x,
)


def regularity_gain(resolutions=(32, 64, 128)) -> tuple[bool, dict]:
    table = []
    for N in resolutions:
        g = make_grid(1, N)
        x = g.coords()[0]
        table.append([regularity_gain_check(GridFunction(g, f(x)), 0) for f in GAIN_CORPUS])
    worst = 1.0
    for a_row, b_row in zip(table, table[1:]):
        for a, b in zip(a_row, b_row):
            worst = max(worst, max(a, b) / min(a, b))
    return worst <= 2.0, {"worst_factor": worst, "finest": table[-1]}


def criterion_10() -> Criterion:
    return _timed(10, "elliptic regularity gain is grid stable", 60.0, regularity_gain)


# ----------------------------------------------------------------- 11


def continuation(N: int = 64, cap: float = 10.0, saturation: float = 1e8) -> tuple[bool, dict]:
    g = make_grid(1, N)
    small, big = small_model(1), blowup_model(1)
    run = continue_solution(small, model_data("small", g), 2.0, 0.5, cap=cap)
    rep_small = continuation_monitor(run.segments, small, 0.05, cap=cap, failed=run.failed)
    run_b = continue_solution(big, model_data("blowup", g), 1.0, 0.25, cap=cap)
    rep_big = continuation_monitor(run_b.segments, big, 0.05, cap=cap, failed=run_b.failed)
    over = np.nonzero(rep_big.w1inf > cap)[0]
    before = bool(over.size) and bool(np.all(np.isfinite(rep_big.high[: over[0] + 1]))) and rep_big.high[over[0]] < saturation
    ok = (rep_small.verdict == "Continuable" and rep_small.w1inf.max() <= cap
          and rep_big.verdict == "BlowupSuspected" and before)
    return ok, {
        "small": rep_small.verdict, "small_w1inf": float(rep_small.w1inf.max()), "sigma_min": rep_small.sigma_min,
        "large": rep_big.verdict, "large_w1inf": float(rep_big.w1inf.max()), "large_horizon": run_b.horizon,
    }


def criterion_11() -> Criterion:
    return _timed(11, "continuation dichotomy", 120.0, continuation)


# ----------------------------------------------------------------- 12


def determinism(workdir) -> tuple[bool, dict]:
    """Every shipped config run three times (threads 1, 1, 4); outputs compared byte for byte."""
    from pathlib import Path

    from .cli import CONFIG_DIR, run_config

    workdir = Path(workdir)
    out, ok = {}, True
    for cfg in sorted(CONFIG_DIR.glob("*.cfg")):
        digests = []
        for label, threads in (("a", 1), ("b", 1), ("c", 4)):
            target = workdir / f"{cfg.stem}-{label}"
            code = run_config(cfg, target, threads=threads)
            files = sorted(target.glob("*.csv")) + [target / "manifest.json"]
            digests.append((code, {f.name: f.read_bytes() for f in files}))
        same = all(d == digests[0] for d in digests) and len(digests[0][1]) > 1
        out[cfg.stem] = same
        ok = ok and same
    return ok, out


def criterion_12(workdir) -> Criterion:
    return _timed(12, "re-runs are bitwise identical across thread counts", None, lambda: determinism(workdir))


ALL = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
       criterion_7, criterion_8, criterion_9, criterion_10, criterion_11)
