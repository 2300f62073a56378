"""Fine sweep of the Born coupling scale to locate the divergence threshold."""

import argparse
from dataclasses import dataclass

import numpy as np

from transwave.elliptic import born_sweep
from transwave.grid import make_grid


@dataclass
class Settings:
    N: int = 64
    s: int = 2
    eps_min: float = 0.1
    eps_max: float = 3.2
    count: int = 16


def run(cfg: Settings) -> None:
    eps = np.geomspace(cfg.eps_min, cfg.eps_max, cfg.count)
    rows = born_sweep(make_grid(1, cfg.N), eps, cfg.s)
    first = next((r.eps for r in rows if r.status == "DivergentBornSeries"), None)
    for r in rows:
        print(f"eps={r.eps:8.4f}  {r.status:<20} iterations={r.iterations:4d}  rho_hat={r.rho_hat:.4f}")
    print(f"first divergent eps: {first}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--count", type=int, default=16)
    a = ap.parse_args()
    run(Settings(N=a.N, count=a.count))
