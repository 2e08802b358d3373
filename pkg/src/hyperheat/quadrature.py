"""Adaptive composite Gauss-Legendre quadrature.

Panels carry a 15-point rule; a panel is accepted when its estimate agrees
with the sum over its two halves to within a share of the absolute tolerance
proportional to its width.  All integrands are called on flat numpy arrays
so a whole generation of panels is evaluated at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import QuadratureNonconvergence

NODES, WEIGHTS = np.polynomial.legendre.leggauss(15)
ROUNDOFF = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    panels: int


def _rule(f, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    return half * (fx @ WEIGHTS)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    abs_tol: float = 1e-10,
    breakpoints=(),
    initial_panels: int = 8,
    max_depth: int = 40,
    max_panels: int = 200_000,
) -> QuadResult:
    """Integrate ``f`` over ``[a, b]``.

    ``breakpoints`` are interior points where the integrand has a kink or a
    narrow feature; each resulting piece starts with ``initial_panels`` panels.

    Raises QuadratureNonconvergence when a panel reaches ``max_depth`` or the
    panel budget is exhausted while its error is still above its share.
    """
    if b < a:
        r = integrate(f, b, a, abs_tol=abs_tol, breakpoints=breakpoints,
                      initial_panels=initial_panels, max_depth=max_depth,
                      max_panels=max_panels)
        return QuadResult(-r.value, r.error, r.panels)
    if b == a:
        return QuadResult(0.0, 0.0, 0)

    cuts = sorted({a, b, *[p for p in breakpoints if a < p < b]})
    edges = np.concatenate(
        [np.linspace(lo, hi, initial_panels + 1)[:-1] for lo, hi in zip(cuts[:-1], cuts[1:])]
        + [np.array([b])]
    )
    lo, hi = edges[:-1], edges[1:]
    whole = _rule(f, lo, hi)
    depth = np.zeros(lo.size, dtype=int)
    width = b - a

    done_lo: list[np.ndarray] = []
    done_val: list[np.ndarray] = []
    done_err: list[np.ndarray] = []
    total_panels = lo.size
    while lo.size:
        mid = 0.5 * (lo + hi)
        left = _rule(f, lo, mid)
        right = _rule(f, mid, hi)
        refined = left + right
        if not np.all(np.isfinite(refined)):
            raise QuadratureNonconvergence("integrand produced non-finite values")
        err = np.abs(refined - whole)
        # a panel whose halves agree to roundoff cannot be improved by bisection
        ok = (err <= abs_tol * (hi - lo) / width) | (err <= ROUNDOFF * np.abs(refined))
        done_lo.append(lo[ok])
        done_val.append(refined[ok])
        done_err.append(err[ok])
        bad = ~ok
        if np.any(depth[bad] >= max_depth) or total_panels > max_panels:
            raise QuadratureNonconvergence(
                f"tolerance {abs_tol:g} not met after {total_panels} panels"
            )
        lo = np.concatenate([lo[bad], mid[bad]])
        hi = np.concatenate([mid[bad], hi[bad]])
        whole = np.concatenate([left[bad], right[bad]])
        depth = np.concatenate([depth[bad], depth[bad]]) + 1
        total_panels += lo.size

    los = np.concatenate(done_lo)
    order = np.argsort(los, kind="stable")
    vals = np.concatenate(done_val)[order]
    errs = np.concatenate(done_err)[order]
    return QuadResult(math.fsum(vals), math.fsum(errs), los.size)


def integrate_log(
    log_f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    abs_tol: float = 1e-10,
    breakpoints=(),
    initial_panels: int = 8,
    probe: int = 4001,
) -> tuple[float, float, float]:
    """Integrate ``exp(log_f)`` after normalising by its sampled peak.

    Returns ``(value, error, log_peak)``; the tolerance applies to the
    normalised integrand, so the absolute error is ``error``, already scaled.
    """
    xs = np.linspace(a, b, probe)
    if breakpoints:
        xs = np.union1d(xs, [p for p in breakpoints if a <= p <= b])
    peak = float(np.max(log_f(xs)))
    if not np.isfinite(peak):
        return 0.0, 0.0, -math.inf

    def g(x):
        return np.exp(log_f(x) - peak)

    r = integrate(g, a, b, abs_tol=abs_tol, breakpoints=breakpoints,
                  initial_panels=initial_panels)
    scale = math.exp(peak)
    return r.value * scale, r.error * scale, peak


def gauss_legendre(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed m-point rule mapped to [a, b] (arrays of a, b broadcast)."""
    x, w = np.polynomial.legendre.leggauss(m)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w
