"""Run the acceptance criteria and print one PASS/FAIL line each.

    python3 scripts/run_acceptance.py            # criteria 1-11
    python3 scripts/run_acceptance.py --all      # adds the determinism re-runs
"""

import argparse
import sys
import tempfile
from dataclasses import dataclass

from transwave import acceptance
from transwave.io import write_table


@dataclass
class Settings:
    include_determinism: bool = False
    csv: str | None = None


def run(cfg: Settings) -> int:
    results = []
    for check in acceptance.ALL:
        res = check()
        print(res.line, flush=True)
        results.append(res)
    if cfg.include_determinism:
        with tempfile.TemporaryDirectory() as tmp:
            res = acceptance.criterion_12(tmp)
        print(res.line, flush=True)
        results.append(res)
    if cfg.csv:
        write_table(cfg.csv, [{"criterion": r.number, "passed": r.passed, "runtime": r.runtime, "name": r.name}
                              for r in results])
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--all", action="store_true", help="also run the determinism criterion")
    ap.add_argument("--csv", help="write a summary table here")
    a = ap.parse_args()
    sys.exit(run(Settings(a.all, a.csv)))
