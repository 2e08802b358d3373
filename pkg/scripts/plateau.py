"""Table of the displaced-mass L1 error against time and displacement.

The positive part (u - G_t)_+ settles on a plateau almost immediately.  Its
height is tanh(a/2): the displaced kernel wins exactly on the half-space
beyond the bisector of the two poles, and nearly all mass sits where
coth r ~ 1.

    python3 scripts/plateau.py [--a 0.5,1,2] [--t 5,10,20,40,80]
"""

from __future__ import annotations

import argparse
import math

from hyperheat.counterexample import positive_part_l1


def floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--a", type=floats, default=[0.5, 1.0, 2.0])
    ap.add_argument("--t", type=floats, default=[5.0, 10.0, 20.0, 40.0, 80.0])
    args = ap.parse_args()

    print("a      " + "".join(f"t={t:<10g}" for t in args.t) + "tanh(a/2)")
    for a in args.a:
        row = "".join(f"{positive_part_l1(a, t):<12.8f}" for t in args.t)
        print(f"{a:<7g}{row}{math.tanh(a / 2):.8f}")


if __name__ == "__main__":
    main()
