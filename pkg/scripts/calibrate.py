"""Measure the empirical constants kept in src/hyperheat/thresholds.json.

Run once; the printed JSON is what gets frozen.  ``--write`` overwrites the
packaged file.  Each constant is the measured extreme widened by a safety
factor and rounded outward to two significant digits.

    python3 scripts/calibrate.py [--write]
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import numpy as np

from hyperheat.counterexample import positive_part_l1
from hyperheat.kernel import KernelSpec, davies_ratio_n3, log_davies, log_kernel
from hyperheat.solver import SolverConfig, build_grid, bump_field, evolve_path, short_time_field

TARGET = Path(__file__).resolve().parents[1] / "src" / "hyperheat" / "thresholds.json"


def round_out(x: float, up: bool, digits: int = 2) -> float:
    if x == 0:
        return 0.0
    scale = 10 ** (digits - 1 - math.floor(math.log10(abs(x))))
    return (math.ceil if up else math.floor)(x * scale) / scale


def davies(n: int, widen: float = 1.05) -> list[float]:
    """Range of G_n / h_n over r in [0.1, 10 (n-1) t], t in [0.5, 50]."""
    if n == 3:
        r = np.geomspace(1e-6, 1e3, 2000)
        ratio = davies_ratio_n3(r)
        return [round_out(ratio.min(), False), round_out(ratio.max(), True)]
    spec = KernelSpec(n)
    lo, hi = math.inf, -math.inf
    for t in np.geomspace(0.5, 50.0, 25):
        r = np.linspace(0.1, 10 * (n - 1) * t, 2000)
        ratio = np.exp(log_kernel(spec, r, t) - log_davies(spec, r, t))
        lo, hi = min(lo, ratio.min()), max(hi, ratio.max())
    print(f"  davies n={n}: measured [{lo:.4f}, {hi:.4f}]")
    return [round_out(lo / widen, False), round_out(hi * widen, True)]


def positive_part(a: float, times=(10.0, 20.0, 40.0), shrink: float = 0.9) -> float:
    values = [positive_part_l1(a, t) for t in times]
    print(f"  positive part a={a:g}: {', '.join(f'{v:.6f}' for v in values)}")
    return round_out(shrink * min(values), False, digits=3)


def smoothing(n: int, widen: float = 1.25) -> float:
    """sup_t t^{3/2} e^{lambda1 t} sup u over t in [1, 40] for unit-mass runs."""
    spec = KernelSpec(n)
    times = np.linspace(1.0, 40.0, 40)
    worst = 0.0
    if spec.odd:
        center = np.array([float(log_kernel(spec, 0.0, t)) for t in times])
        worst = max(worst, float(np.max(times**1.5 * np.exp(spec.lambda1 * times + center))))
    if n <= 3:
        grid = build_grid(n, 10.0, 200)
        starts = [bump_field(grid, R) for R in (0.5, 1.0, 2.0)]
        starts.append(short_time_field(grid, 0.05))
        for u0 in starts:
            for u in evolve_path(u0, times - u0.time, SolverConfig()):
                w = u.time**1.5 * math.exp(spec.lambda1 * u.time) * np.max(u.values)
                worst = max(worst, w / u.cell_mass())
    print(f"  smoothing n={n}: measured {worst:.5f}")
    return round_out(widen * worst, True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()
    table = {
        "davies": {str(n): davies(n) for n in (3, 5, 7, 9)},
        "positive_part_l1": {f"{a:g}": positive_part(a) for a in (1.0, 2.0)},
        "smoothing": {str(n): smoothing(n) for n in (2, 3, 5)},
    }
    text = json.dumps(table, indent=2, sort_keys=True) + "\n"
    print(text)
    if args.write:
        TARGET.write_text(text)
        print(f"wrote {TARGET}")


if __name__ == "__main__":
    main()
