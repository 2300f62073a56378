"""Leakage of a localized perturbation outside the physical and the stencil cones.

Leapfrog at dt = 0.4 h reaches one cell per step, i.e. speed h / dt = 2.5,
so its numerical domain of dependence is wider than the unit-speed cone.
This script reports how the leakage outside the unit cone scales with N.
"""

import argparse
from dataclasses import dataclass, field

import numpy as np

from transwave.acceptance import flat_matrix
from transwave.grid import make_grid
from transwave.waves import LinearProblem, speed_check


@dataclass
class Settings:
    resolutions: list[int] = field(default_factory=lambda: [32, 64, 128, 256])
    T: float = 0.6
    radius: float = 0.2


def run(cfg: Settings) -> None:
    print(f"{'N':>5} {'unit cone':>12} {'stencil cone':>13}")
    for N in cfg.resolutions:
        g = make_grid(1, N)
        x = g.axis_coords
        bump = np.where(np.abs(x) < cfg.radius, np.cos(np.pi * x / (2 * cfg.radius)) ** 4, 0.0)
        zero = np.zeros(N)
        a = LinearProblem(g, flat_matrix(g), None, [zero, zero], T=cfg.T)
        b = LinearProblem(g, flat_matrix(g), None, [bump, zero], T=cfg.T)
        unit = speed_check(a, b, [0.0], 1.0).max_leakage
        stencil = speed_check(a, b, [0.0], g.h / a.dt).max_leakage
        print(f"{N:5d} {unit:12.3e} {stencil:13.3e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolutions", type=int, nargs="+", default=[32, 64, 128, 256])
    a = ap.parse_args()
    run(Settings(a.resolutions))
