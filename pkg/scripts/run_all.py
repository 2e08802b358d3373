"""Run every registered experiment with its defaults and write the artifacts.

    python3 scripts/run_all.py [out_dir] [--only name,name]

Prints one line per experiment with its wall time and any failed
``pass.*`` flag; exits 1 if any flag failed.
"""

from __future__ import annotations

import argparse
import sys
import time

from hyperheat.experiments import EXPERIMENTS, run_experiment
from hyperheat.report import write_report


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="artifacts")
    ap.add_argument("--only", help="comma-separated experiment names")
    args = ap.parse_args()
    names = args.only.split(",") if args.only else sorted(EXPERIMENTS)

    failed = 0
    for name in names:
        start = time.perf_counter()
        report = run_experiment(name, {})
        paths = write_report(report, args.out)
        bad = [k for k, v in report.metrics.items() if k.startswith("pass.") and v != 1.0]
        failed += bool(bad)
        status = "ok" if not bad else "FAILED " + ", ".join(sorted(bad))
        print(f"{name:16s} {time.perf_counter() - start:6.1f}s  {len(paths)} files  {status}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
