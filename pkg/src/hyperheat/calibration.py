"""Frozen empirical constants.

Several constants are known to exist (Davies c_n, the plateau c(a) of the
displaced-mass error, the smoothing constant C_n) but have no closed form.  They were measured once with ``scripts/calibrate.py`` and are kept
in ``thresholds.json`` next to this module; tests and the CLI read them from
there and never recompute them.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


SECTIONS = ("davies", "positive_part_l1", "smoothing")


@lru_cache(maxsize=None)
def load_thresholds() -> dict:
    text = resources.files(__package__).joinpath("thresholds.json").read_text()
    return json.loads(text)


def read_thresholds(path) -> dict:
    """A threshold file in the packaged layout; missing sections fall back
    to the packaged values."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or set(data) - set(SECTIONS):
        raise ValueError(f"threshold file may only hold sections {SECTIONS}")
    merged = {k: dict(v) for k, v in load_thresholds().items()}
    for k, v in data.items():
        merged[k].update(v)
    return merged


def davies_constants(n: int) -> tuple[float, float]:
    table = load_thresholds()["davies"]
    try:
        lo, hi = table[str(n)]
    except KeyError:
        raise KeyError(f"no calibrated Davies constants for n={n}") from None
    return float(lo), float(hi)


def positive_part_threshold(a: float, table: dict | None = None) -> float:
    table = table or load_thresholds()
    try:
        return float(table["positive_part_l1"][f"{a:g}"])
    except KeyError:
        raise KeyError(f"no calibrated positive-part threshold for a={a:g}") from None


def smoothing_constant(n: int, table: dict | None = None) -> float:
    table = table or load_thresholds()
    try:
        return float(table["smoothing"][str(n)])
    except KeyError:
        raise KeyError(f"no calibrated smoothing constant for n={n}") from None
