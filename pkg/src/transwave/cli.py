"""Config-driven experiment runner.

    python -m transwave run configs/flat_wave.cfg --out runs/flat
    python -m transwave report runs/flat
    python -m transwave list-models

Configs are INI files.  ``[run]`` names the suites; every suite reads its own
section.  Exit codes: 0 success, 1 a check failed, 2 bad config,
3 Picard iteration did not converge, 4 blow-up suspected.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import acceptance
from .elliptic import born_sweep, regularity_gain_check
from .grid import GridFunction, make_grid
from .io import read_table, write_table
from .norms import INEQUALITIES, inequality_check
from .quasilinear import MODELS, NoConvergence, continuation_monitor, continue_solution, model_data, solve_quasilinear
from .smoothing import mollify
from .norms import sobolev_norm
from .timejets import mu_sources
from .waves import LinearProblem, solve_linear

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"
SUITES = ("norms", "smoothing", "elliptic", "born", "timejets", "waves", "quasilinear", "acceptance")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NOCONV, EXIT_BLOWUP = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    name: str
    suites: list[str]
    n: int
    N: int
    seed: int
    sections: dict[str, dict[str, str]] = field(default_factory=dict)

    def get(self, section: str, key: str, default, cast=float):
        raw = self.sections.get(section, {}).get(key)
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None

    def floats(self, section: str, key: str, default) -> list[float]:
        raw = self.sections.get(section, {}).get(key)
        if raw is None:
            return list(default)
        try:
            return [float(v) for v in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a list of numbers, got {raw!r}") from None


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate before any compute; the first failing constraint is named."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case sensitive: n and N differ
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not parser.has_section("run"):
        raise ConfigError(f"{path}: missing [run] section")
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    run = sections["run"]
    suites = [s for s in run.get("suites", "").replace(",", " ").split() if s]
    if not suites:
        raise ConfigError("[run] suites is empty")
    for s in suites:
        if s not in SUITES:
            raise ConfigError(f"[run] unknown suite {s!r}; choose from {', '.join(SUITES)}")
    cfg = RunConfig(run.get("name", Path(path).stem), suites, 1, 64, 0, sections)
    cfg.n = cfg.get("grid", "n", 1, int)
    cfg.N = cfg.get("grid", "N", 64, int)
    cfg.seed = cfg.get("run", "seed", 0, int)
    if cfg.n not in (1, 2, 3):
        raise ConfigError(f"[grid] n must be 1, 2 or 3, got {cfg.n}")
    if cfg.N < 8 or cfg.N % 2:
        raise ConfigError(f"[grid] N must be even and >= 8, got {cfg.N}")
    if "quasilinear" in suites:
        model = cfg.get("quasilinear", "model", "small", str)
        if model not in MODELS:
            raise ConfigError(f"[quasilinear] unknown model {model!r}")
    if "waves" in suites and cfg.get("waves", "steps", 1000, int) < 1:
        raise ConfigError("[waves] steps must be positive")
    return cfg


# ------------------------------------------------------------------ suites


@dataclass
class SuiteResult:
    suite: str
    files: list[str]
    checks: dict[str, bool]
    code: int = EXIT_OK
    notes: dict = field(default_factory=dict)


def suite_norms(cfg: RunConfig, out: Path) -> SuiteResult:
    records = []
    for name in INEQUALITIES:
        records += inequality_check(name).as_records()
    write_table(out / "norms_constants.csv", records)
    return SuiteResult("norms", ["norms_constants.csv"], {"constants_finite": all(np.isfinite(r["max_ratio"]) for r in records)})


def suite_smoothing(cfg: RunConfig, out: Path) -> SuiteResult:
    g = make_grid(1, cfg.N)
    x = g.coords()[0]
    f = GridFunction(g, np.sin(np.pi * x))
    records = []
    for order in (1, 3):
        for lam in (0.5, 0.25, 0.125, 0.0625):
            err = sobolev_norm(mollify(f, lam, order) - f, 1, "Omega").value
            records.append({"reflection_order": order, "lambda": lam, "H1_Omega_error": err})
    write_table(out / "smoothing.csv", records)
    hi = [r["H1_Omega_error"] for r in records if r["reflection_order"] == 3]
    return SuiteResult("smoothing", ["smoothing.csv"], {"converges": hi[-1] < 0.1 * hi[0]})


def suite_elliptic(cfg: RunConfig, out: Path) -> SuiteResult:
    records = []
    for N in (cfg.N // 2, cfg.N, 2 * cfg.N):
        g = make_grid(1, N)
        x = g.coords()[0]
        for j, fn in enumerate(acceptance.GAIN_CORPUS):
            records.append({"N": N, "function": j, "gain_ratio": regularity_gain_check(GridFunction(g, fn(x)), 0)})
    write_table(out / "elliptic_gain.csv", records)
    return SuiteResult("elliptic", ["elliptic_gain.csv"], {})


def suite_born(cfg: RunConfig, out: Path) -> SuiteResult:
    g = make_grid(1, cfg.N)
    eps = cfg.floats("born", "eps", acceptance.BORN_EPS)
    s = cfg.get("born", "s", 2, int)
    rows = born_sweep(g, eps, s)
    write_table(out / "born_sweep.csv", [asdict(r) for r in rows])
    return SuiteResult("born", ["born_sweep.csv"], {"divergent_row_present": any(r.status == "DivergentBornSeries" for r in rows)})


def suite_timejets(cfg: RunConfig, out: Path) -> SuiteResult:
    s = cfg.get("timejets", "s", 3, int)
    ok1, d1 = acceptance.jets_oracle(cfg.N, 4)
    prob = acceptance.standard_interface_problem(cfg.N)
    from .elliptic import standard_psi
    from .grid import cutoff_phi

    res = mu_sources(prob, cutoff_phi(prob.grid, 1.0).data, standard_psi(prob.grid).data, s)
    records = [{"quantity": "jet_relative_error", "value": d1["max_relative_error"]}, {"quantity": "eta0", "value": res.eta0}]
    records += [{"quantity": f"mu{ell}_sup", "value": float(np.max(np.abs(m)))} for ell, m in enumerate(res.mu)]
    write_table(out / "timejets.csv", records)
    return SuiteResult("timejets", ["timejets.csv"], {"jets_exact": ok1, "eta0_ge_4h": res.eta0 >= 4 * prob.grid.h})


def suite_waves(cfg: RunConfig, out: Path) -> SuiteResult:
    g = make_grid(cfg.n, cfg.N)
    steps = cfg.get("waves", "steps", 1000, int)
    mode = cfg.get("waves", "mode", 2, int)
    stride = cfg.get("waves", "stride", 100, int)
    dt = 0.4 * g.h
    xn = g.coords()[-1]
    A = acceptance.flat_matrix(g)
    prob = LinearProblem(g, A, None, [np.sin(mode * np.pi * xn), np.zeros(g.shape)], T=steps * dt, dt=dt,
                         snapshot_stride=stride)
    traj, trace = solve_linear(prob, track_high=False)
    drift = np.abs(trace.discrete / trace.discrete[0] - 1.0)
    write_table(out / "energy_drift.csv",
                [{"step": k, "t": r["t"], "E": r["E"], "discrete": r["discrete"], "drift": float(d)}
                 for k, (r, d) in enumerate(zip(trace.as_records(), drift))])
    write_table(out / "snapshots.csv",
                [{"t": float(t), "l2": float(np.sqrt(np.sum(u * u) * g.cell_volume))} for t, u in zip(traj.times, traj.values)])
    return SuiteResult("waves", ["energy_drift.csv", "snapshots.csv"], {"drift_le_1e-8": float(drift.max()) <= 1e-8},
                       notes={"max_drift": float(drift.max())})


def suite_quasilinear(cfg: RunConfig, out: Path) -> SuiteResult:
    g = make_grid(1, cfg.N)
    name = cfg.get("quasilinear", "model", "small", str)
    T = cfg.get("quasilinear", "T", 1.0)
    tol = cfg.get("quasilinear", "tol", 1e-10)
    model = MODELS[name](1)
    data = model_data(name, g)
    code = EXIT_OK
    checks = {}
    try:
        res = solve_quasilinear(model, data, T, tol=tol, seed=None if cfg.seed == 0 else cfg.seed)
        write_table(out / "picard.csv", [asdict(st) for st in res.history],
                    ["index", "T", "R", "high", "distance", "ratio"])
        checks["converged"] = res.converged
    except NoConvergence as exc:
        write_table(out / "picard.csv", [asdict(st) for st in exc.history], ["index", "T", "R", "high", "distance", "ratio"])
        checks["converged"] = False
        code = EXIT_NOCONV
    window = cfg.get("quasilinear", "window", 0.5)
    horizon = cfg.get("quasilinear", "horizon", 2.0)
    run = continue_solution(model, data, horizon, window)
    rep = continuation_monitor(run.segments, model, 0.05, failed=run.failed)
    write_table(out / "continuation.csv",
                [{"t": float(t), "w1inf": float(w), "high": float(h)} for t, w, h in zip(rep.times, rep.w1inf, rep.high)])
    checks["verdict_" + rep.verdict] = True
    if rep.verdict == "BlowupSuspected" and code == EXIT_OK:
        code = EXIT_BLOWUP
    return SuiteResult("quasilinear", ["picard.csv", "continuation.csv"], checks, code, {"verdict": rep.verdict})


def suite_acceptance(cfg: RunConfig, out: Path) -> SuiteResult:
    results = [c() for c in acceptance.ALL]
    write_table(out / "acceptance.csv", [{"criterion": r.number, "name": r.name, "passed": r.passed} for r in results])
    return SuiteResult("acceptance", ["acceptance.csv"], {f"criterion_{r.number}": r.passed for r in results})


SUITE_FUNCS: dict[str, Callable[[RunConfig, Path], SuiteResult]] = {
    "norms": suite_norms,
    "smoothing": suite_smoothing,
    "elliptic": suite_elliptic,
    "born": suite_born,
    "timejets": suite_timejets,
    "waves": suite_waves,
    "quasilinear": suite_quasilinear,
    "acceptance": suite_acceptance,
}


def run_config(path: str | Path, out: str | Path | None = None, seed: int | None = None, threads: int = 1) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if seed is not None:
        cfg.seed = seed
    out = Path(out or Path("runs") / cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    # suites are independent; each writes its own files, so ordering is irrelevant
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda s: SUITE_FUNCS[s](cfg, out), cfg.suites))
    manifest = {
        "name": cfg.name,
        "grid": {"n": cfg.n, "N": cfg.N},
        "seed": cfg.seed,
        "suites": {r.suite: {"files": r.files, "checks": r.checks, "code": r.code, "notes": r.notes} for r in results},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    codes = [r.code for r in results if r.code != EXIT_OK]
    if codes:
        return codes[0]
    return EXIT_OK if all(all(r.checks.values()) for r in results) else EXIT_FAIL


def report(dirs: list[str | Path]) -> str:
    """One table per suite from the manifests of one or more run directories."""
    rows = []
    for d in dirs:
        d = Path(d)
        man = d / "manifest.json"
        if not man.exists():
            raise FileNotFoundError(f"{d}: expected manifest.json and the suite CSVs it lists")
        data = json.loads(man.read_text())
        for suite, info in data["suites"].items():
            missing = [f for f in info["files"] if not (d / f).exists()]
            if missing:
                raise FileNotFoundError(f"{d}: missing {', '.join(missing)}")
            rows.append((suite, data["name"], info, d))
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = []
    current = None
    for suite, name, info, d in rows:
        if suite != current:
            lines.append(f"== {suite}")
            current = suite
        for check, ok in sorted(info["checks"].items()):
            flag = "ok" if ok else "VIOLATION"
            lines.append(f"  {name:<16} {check:<28} {flag}")
        for key, val in sorted(info["notes"].items()):
            lines.append(f"  {name:<16} {key:<28} {val}")
        if suite == "born":
            for r in read_table(d / "born_sweep.csv"):
                lines.append(f"  {name:<16} eps={float(r['eps']):<8g} {r['status']:<20} rho_hat={float(r['rho_hat']):.4g}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="suites run concurrently on this many threads")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    ap = argparse.ArgumentParser(prog="transwave", description=__doc__.split("\n\n")[0], parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the suites named in a config", parents=[common])
    p_run.add_argument("config")
    p_rep = sub.add_parser("report", help="summarise one or more run directories", parents=[common])
    p_rep.add_argument("dirs", nargs="+")
    sub.add_parser("list-models", help="list quasi-linear models", parents=[common])
    args = ap.parse_args(argv)
    if args.command == "run":
        return run_config(args.config, getattr(args, "out", None), getattr(args, "seed", None), getattr(args, "threads", 1))
    if args.command == "report":
        try:
            print(report(args.dirs))
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
        return EXIT_OK
    for name, factory in MODELS.items():
        model = factory(1)
        print(f"{name:<8} gamma={model.gamma:g} kappa={model.kappa:g}  {(factory.__doc__ or '').strip().splitlines()[0]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
