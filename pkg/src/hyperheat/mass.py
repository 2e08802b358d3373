"""Where the mass of a radial heat flow sits, and its drift-corrected limit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from .errors import DomainError, EvenDimensionUnsupported, MassDeficitError, OutOfConeError
from .kernel import (
    KernelSpec,
    davies_tail_bound,
    dlog_kernel_dt,
    log_gaussian1d,
    log_weighted_density,
    mass_window,
)
from .quadrature import integrate, integrate_log
from .solver import RadialField


@dataclass(frozen=True, eq=False)
class MassProfile:
    """Samples of the cumulative mass M(r_i) at one time."""

    r: np.ndarray
    cumulative: np.ndarray
    time: float

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        M = np.asarray(self.cumulative, dtype=float)
        if r.shape != M.shape or r.ndim != 1 or r.size < 2:
            raise DomainError("radii and cumulative mass must be matching 1-D arrays")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "cumulative", M)

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])


def _cumulative_trapezoid(r: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(r) * (rho[1:] + rho[:-1]))])


def mass_function(u: RadialField) -> MassProfile:
    """Cumulative mass M(r) = omega_n int_0^r sinh^{n-1}(s) u(s) ds (trapezoid)."""
    rho = u.grid.density * u.values
    return MassProfile(u.grid.nodes, _cumulative_trapezoid(u.grid.nodes, rho), u.time)


def kernel_mass_profile(spec: KernelSpec, t: float, r) -> MassProfile:
    """Mass function of the exact kernel, built from the log-domain density
    so that large radii in high dimension do not overflow."""
    r = np.asarray(r, dtype=float)
    rho = np.exp(log_weighted_density(spec, r, t))
    return MassProfile(r, _cumulative_trapezoid(r, rho), t)


@dataclass(frozen=True)
class DriftFrame:
    n: int
    t: float
    s: np.ndarray
    xi: np.ndarray

    @classmethod
    def from_radii(cls, n: int, t: float, r) -> "DriftFrame":
        if not t > 0:
            raise DomainError("t must be positive")
        s = np.asarray(r, dtype=float) - (n - 1) * t
        return cls(n, t, s, s / math.sqrt(t))

    @classmethod
    def from_xi(cls, n: int, t: float, xi) -> "DriftFrame":
        if not t > 0:
            raise DomainError("t must be positive")
        xi = np.asarray(xi, dtype=float)
        return cls(n, t, xi * math.sqrt(t), xi)

    @property
    def r(self) -> np.ndarray:
        return self.s + (self.n - 1) * self.t


def half_mass_radius(profile: MassProfile) -> float:
    """Radius enclosing half the total mass, by linear interpolation."""
    total = profile.total
    if total < 0.9:
        raise MassDeficitError(f"profile holds only {total:.4g} of unit mass")
    M = profile.cumulative
    half = 0.5 * total
    i = int(np.searchsorted(M, half, side="left"))
    if i == 0:
        return float(profile.r[0])
    m0, m1 = M[i - 1], M[i]
    r0, r1 = profile.r[i - 1], profile.r[i]
    if m1 == m0:
        return float(r0)
    return float(r0 + (half - m0) * (r1 - r0) / (m1 - m0))


def sign_change_radius(n: int, t: float) -> float:
    """Radius where d/dt G_n(r, t) changes sign (from negative inside)."""
    spec = KernelSpec(n)
    if not t > 0:
        raise DomainError("t must be positive")
    if n == 3:
        return math.sqrt(6.0 * t + 4.0 * t * t)
    if not spec.odd:
        raise EvenDimensionUnsupported("sign-change line needs the exact kernel")

    def g(r):
        return float(dlog_kernel_dt(spec, r, t))

    hi = max(1.0, 2.0 * (n - 1) * t)
    while g(hi) <= 0:
        hi *= 2.0
    return brentq(g, 0.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)


def _density_integral(spec: KernelSpec, t: float, lo: float, hi: float) -> tuple[float, float]:
    center = (spec.n - 1) * t
    bps = [p for p in (center - 6 * math.sqrt(t), center, center + 6 * math.sqrt(t))
           if lo < p < hi]
    value, err, _ = integrate_log(lambda r: log_weighted_density(spec, r, t), lo, hi,
                                  abs_tol=1e-11, breakpoints=bps)
    return value, err


def annulus_mass_fraction(spec: KernelSpec, t: float, k: float) -> float:
    """Kernel mass within (n-1) t +- k sqrt(t)."""
    if t < 1 or not k > 0:
        raise DomainError("need t >= 1 and k > 0")
    center = (spec.n - 1) * t
    lo = max(0.0, center - k * math.sqrt(t))
    hi = center + k * math.sqrt(t)
    value, _ = _density_integral(spec, t, lo, hi)
    return value


def rescaled_profile(spec: KernelSpec, t: float, xi_grid) -> np.ndarray:
    """sqrt(t) rho((n-1) t + xi sqrt(t), t) on the given xi values."""
    if not t > 0:
        raise DomainError("t must be positive")
    xi = np.asarray(xi_grid, dtype=float)
    xi0 = -(spec.n - 1) * math.sqrt(t)
    if np.any(xi < xi0 - 1e-12):
        raise OutOfConeError(f"xi below the cone edge {xi0:.6g}")
    r = np.maximum(DriftFrame.from_xi(spec.n, t, xi).r, 0.0)
    return math.sqrt(t) * np.exp(log_weighted_density(spec, r, t))


def rescaled_moments(spec: KernelSpec, t: float) -> tuple[float, float]:
    """Zeroth and first xi-moments of the rescaled profile over the cone."""
    xi0 = -(spec.n - 1) * math.sqrt(t)
    hi = 16.0
    bps = [p for p in (-6.0, 0.0, 6.0) if xi0 < p < hi]
    m0 = integrate(lambda x: rescaled_profile(spec, t, x), xi0, hi,
                   abs_tol=1e-11, breakpoints=bps).value
    m1 = integrate(lambda x: x * rescaled_profile(spec, t, x), xi0, hi,
                   abs_tol=1e-11, breakpoints=bps).value
    return m0, m1


@dataclass(frozen=True)
class L1Error:
    value: float
    quad_error: float
    tail_bound: float


def gaussian_l1_error(spec: KernelSpec, t: float) -> L1Error:
    """int_0^inf |rho(r, t) - E_1(r - (n-1) t, t)| dr.

    Integrated on [0, (n-1) t + 12 sqrt t]; ``tail_bound`` adds the Davies
    bound on rho beyond that point and the Gaussian tail mass.
    """
    if t < 1:
        raise DomainError("need t >= 1")
    if not spec.odd:
        raise EvenDimensionUnsupported("needs the exact kernel")
    center = (spec.n - 1) * t
    r_max = mass_window(spec, t)
    sq = math.sqrt(t)

    def diff(r):
        a = np.exp(log_weighted_density(spec, r, t))
        b = np.exp(log_gaussian1d(r - center, t))
        return np.abs(a - b)

    bps = [p for p in (center - 6 * sq, center - 2 * sq, center, center + 2 * sq, center + 6 * sq)
           if 0 < p < r_max]
    res = integrate(diff, 0.0, r_max, abs_tol=1e-10, breakpoints=bps, initial_panels=16)
    gauss_tail = 0.5 * erfc(12.0 / 2.0)
    return L1Error(res.value, res.error, davies_tail_bound(spec, t, r_max) + gauss_tail)


def delayed_l1_gap(spec: KernelSpec, t: float, delay: float = 1.0) -> L1Error:
    """|| G_t - G_{t+delay} ||_{L^1(dmu)} by quadrature of the two densities."""
    if not t > 0 or not delay > 0:
        raise DomainError("need t > 0 and delay > 0")
    if not spec.odd:
        raise EvenDimensionUnsupported("needs the exact kernel")
    r_max = mass_window(spec, t + delay)

    def diff(r):
        return np.abs(np.exp(log_weighted_density(spec, r, t))
                      - np.exp(log_weighted_density(spec, r, t + delay)))

    c0, c1 = (spec.n - 1) * t, (spec.n - 1) * (t + delay)
    bps = [p for p in (c0 - 6 * math.sqrt(t), c0, c1, c1 + 6 * math.sqrt(t)) if 0 < p < r_max]
    res = integrate(diff, 0.0, r_max, abs_tol=1e-11, breakpoints=bps, initial_panels=16)
    tail = davies_tail_bound(spec, t, r_max) + davies_tail_bound(spec, t + delay, r_max)
    return L1Error(res.value, res.error, tail)
