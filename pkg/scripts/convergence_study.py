"""Manufactured-solution errors of the leapfrog solver for both startups."""

import argparse
from dataclasses import dataclass, field

from transwave.acceptance import mms_error, observed_orders


@dataclass
class Settings:
    resolutions: list[int] = field(default_factory=lambda: [32, 64, 128, 256])
    phases: list[float] = field(default_factory=lambda: [0.0, 1.0])


def run(cfg: Settings) -> None:
    print(f"{'phase':>6} {'startup':>8} " + " ".join(f"{'N=' + str(N):>11}" for N in cfg.resolutions) + "   orders")
    for phase in cfg.phases:
        for startup in ("jet", "naive"):
            errs = [mms_error(N, startup, phase) for N in cfg.resolutions]
            orders = ", ".join(f"{p:.3f}" for p in observed_orders(errs))
            print(f"{phase:>6g} {startup:>8} " + " ".join(f"{e:11.3e}" for e in errs) + f"   {orders}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolutions", type=int, nargs="+", default=[32, 64, 128, 256])
    a = ap.parse_args()
    run(Settings(a.resolutions))
