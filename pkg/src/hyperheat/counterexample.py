"""Displaced point masses in H^3 and why L^1 convergence to the centered
kernel fails for non-radial data.

The displaced kernel is G_t(L) with L the distance to a pole moved by ``a``
along one axis, so everything here is exact kernel evaluation plus
quadrature in (r, cos theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dual as ad
from .errors import DomainError, QuadratureNonconvergence
from .kernel import KernelSpec, LogScalar, geodesic_distance, kernel_log, log_kernel, q_profile
from .quadrature import gauss_legendre, integrate_log

H3 = KernelSpec(3)
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class DisplacedConfig:
    """A unit mass started at distance ``a`` from the pole, seen at time ``t``.

    ``angular_nodes`` is the fixed Gauss-Legendre order in cos(theta);
    ``margin`` sets the outer radius 2 t + a + margin sqrt(t).
    """

    a: float
    t: float
    angular_nodes: int = 64
    margin: float = 12.0
    abs_tol: float = 1e-9

    def __post_init__(self):
        if not self.a >= 0 or not math.isfinite(self.a):
            raise DomainError("displacement a must be finite and >= 0")
        if not self.t > 0:
            raise DomainError("t must be positive")
        if self.angular_nodes < 8:
            raise DomainError("need at least 8 angular nodes")

    @property
    def r_max(self) -> float:
        return 2.0 * self.t + self.a + self.margin * math.sqrt(self.t)


def displaced_log(cfg: DisplacedConfig, r, theta):
    r = np.asarray(r, dtype=float)
    return log_kernel(H3, geodesic_distance(r, cfg.a, theta), cfg.t)


def displaced_value_log(cfg: DisplacedConfig, r: float, theta: float) -> LogScalar:
    """log G_t at the distance from (r, theta) to the displaced pole."""
    return LogScalar.from_log(float(displaced_log(cfg, r, theta)))


def _check_beyond(a: float, r):
    if np.any(np.asarray(r) <= a):
        raise DomainError("need r > a")


def _log_ratio_on_axis(a, r, t):
    # log G_t(r - a) - log G_t(r), written so nothing overflows
    return (a * r / (2.0 * t) - a * a / (4.0 * t)
            + ad.log_x_over_sinh(r - a) - ad.log_x_over_sinh(r))


def axis_ratio(a: float, r, t: float):
    """G_t(r - a) / G_t(r) on the axis through both poles."""
    _check_beyond(a, r)
    if not t > 0:
        raise DomainError("t must be positive")
    r = np.asarray(r, dtype=float)
    with np.errstate(all="ignore"):
        out = np.exp(_log_ratio_on_axis(a, r, t))
    return float(out) if out.ndim == 0 else out


def axis_ratio_readings(a: float, r: float, t: float) -> dict[str, float]:
    """Both denominators a reader might take for the axis ratio.

    ``centered_at_r`` compares with G_t(r), the centered kernel at the same
    point; ``centered_at_a`` divides by G_t(a) instead.
    """
    top = float(log_kernel(H3, r - a, t)) if r > a else math.nan
    _check_beyond(a, r)
    return {
        "centered_at_r": axis_ratio(a, r, t),
        "centered_at_a": math.exp(top - float(log_kernel(H3, a, t))),
    }


def pointwise_gap(a: float, r: float, t: float) -> float:
    """t^{3/2} e^{t} |G_t(r - a) - G_t(r)|."""
    _check_beyond(a, r)
    if t < 1:
        raise DomainError("need t >= 1")
    weight = 1.5 * math.log(t) + t
    hi = float(log_kernel(H3, r - a, t)) + weight
    lo = float(log_kernel(H3, r, t)) + weight
    return abs(math.exp(hi) - math.exp(lo))


def pointwise_gap_limit(a: float, r: float) -> float:
    _check_beyond(a, r)
    return float(q_profile(H3, r - a) - q_profile(H3, r))


# --- two-dimensional quadrature -------------------------------------------


def _inner(cfg: DisplacedConfig, r: np.ndarray, lo: np.ndarray, hi: np.ndarray, fn):
    """Fixed GL rule in u = cos(theta) on [lo, hi] for each radius."""
    u, w = gauss_legendre(cfg.angular_nodes, lo, hi)
    theta = np.arccos(np.clip(u, -1.0, 1.0))
    rr = np.broadcast_to(r[:, None], u.shape)
    log_l = displaced_log(cfg, rr, theta)
    log_c = log_kernel(H3, r, cfg.t)[:, None]
    return np.sum(w * fn(log_l, log_c), axis=1)


def _log_shell(r: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return LOG_2PI + 2.0 * np.log(np.sinh(np.minimum(r, 700.0)))


def _radial(cfg: DisplacedConfig, lo: float, hi: float, log_inner) -> float:
    center = 2.0 * cfg.t
    sq = math.sqrt(cfg.t)
    bps = [p for p in (center - 6 * sq, center, center + 6 * sq) if lo < p < hi]
    try:
        value, _, _ = integrate_log(log_inner, lo, hi, abs_tol=cfg.abs_tol,
                                    breakpoints=bps, initial_panels=8)
    except QuadratureNonconvergence as exc:
        raise QuadratureNonconvergence(f"displaced-mass integral a={cfg.a}, t={cfg.t}: {exc}")
    return value


def _cut(cfg: DisplacedConfig, r: np.ndarray) -> np.ndarray:
    """cos(theta) above which the displaced kernel beats the centered one."""
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, math.tanh(cfg.a / 2.0) / np.tanh(r))


def _log_of(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(x, 0.0))


def displaced_mass(cfg: DisplacedConfig) -> float:
    """Total mass of the displaced kernel inside the ball of radius r_max."""

    def log_inner(r):
        r = np.asarray(r, dtype=float)
        ones = np.ones_like(r)
        inner = _inner(cfg, r, -ones, ones, lambda ll, lc: np.exp(ll - lc))
        return _log_of(inner) + log_kernel(H3, r, cfg.t) + _log_shell(r)

    return _radial(cfg, 0.0, cfg.r_max, log_inner)


def positive_part_l1(a: float, t: float, cfg: DisplacedConfig | None = None) -> float:
    """|| (G_t(L) - G_t(r))_+ ||_{L^1(H^3)} for a unit mass displaced by a."""
    if t < 1:
        raise DomainError("need t >= 1")
    cfg = cfg or DisplacedConfig(a, t)
    if a == 0:
        return 0.0

    def log_inner(r):
        r = np.asarray(r, dtype=float)
        inner = _inner(cfg, r, _cut(cfg, r), np.ones_like(r),
                       lambda ll, lc: np.expm1(np.maximum(ll - lc, 0.0)))
        return _log_of(inner) + log_kernel(H3, r, cfg.t) + _log_shell(r)

    return _radial(cfg, a / 2.0, cfg.r_max, log_inner)


def negative_part_l1(a: float, t: float, cfg: DisplacedConfig | None = None) -> float:
    """|| (G_t(r) - G_t(L))_+ ||_1, the other half of the mass balance."""
    if t < 1:
        raise DomainError("need t >= 1")
    cfg = cfg or DisplacedConfig(a, t)
    if a == 0:
        return 0.0

    def log_inner(r):
        r = np.asarray(r, dtype=float)
        inner = _inner(cfg, r, -np.ones_like(r), _cut(cfg, r),
                       lambda ll, lc: -np.expm1(np.minimum(ll - lc, 0.0)))
        return _log_of(inner) + log_kernel(H3, r, cfg.t) + _log_shell(r)

    return _radial(cfg, 0.0, cfg.r_max, log_inner)


# --- symmetric pair and delayed comparison ------------------------------------


def two_mass_value(a: float, r, t: float):
    """On-axis value of half a unit mass at each of +a and -a."""
    _check_beyond(a, r)
    r = np.asarray(r, dtype=float)
    out = 0.5 * (np.exp(log_kernel(H3, r - a, t)) + np.exp(log_kernel(H3, r + a, t)))
    return float(out) if out.ndim == 0 else out


def two_mass_ratio(a: float, r, t: float):
    """two_mass_value / G_t(r), computed without forming either factor."""
    _check_beyond(a, r)
    r = np.asarray(r, dtype=float)
    with np.errstate(all="ignore"):
        up = _log_ratio_on_axis(a, r, t)
        down = _log_ratio_on_axis(-a, r, t)
        out = 0.5 * (np.exp(up) + np.exp(down))
    return float(out) if out.ndim == 0 else out


def _check_far_field(a: float, eps: float, r, t: float):
    if not eps > 0 or not t > 0:
        raise DomainError("need eps > 0 and t > 0")
    _check_beyond(a, r)
    if np.any(np.asarray(r) < 2.0 * a * t / eps * (1 - 1e-12)):
        raise DomainError("r must lie beyond (2a/eps) t")


def far_field_delayed_bound(a: float, eps: float, r, t: float):
    """G_t(r - a) / G_{t+eps}(r): the displaced kernel against a delayed
    centered one, in the far field r >= (2a/eps) t."""
    _check_far_field(a, eps, r, t)
    r = np.asarray(r, dtype=float)
    out = np.exp(log_kernel(H3, r - a, t) - log_kernel(H3, r, t + eps))
    return float(out) if out.ndim == 0 else out


def far_field_envelope(a: float, eps: float, r, t: float):
    """Closed-form upper bound for far_field_delayed_bound.

    Drops only (r-a)/r <= 1 and (1 - e^{-2r}) <= 1 from the exact ratio.
    """
    _check_far_field(a, eps, r, t)
    r = np.asarray(r, dtype=float)
    s = t + eps
    expo = -(eps * r * r - 2.0 * a * r * s + a * a * s) / (4.0 * t * s)
    log_env = (1.5 * math.log(s / t) + eps + a - np.log1p(-np.exp(-2.0 * (r - a))) + expo)
    out = np.exp(log_env)
    return float(out) if out.ndim == 0 else out


def far_field_simplified_form(a: float, eps: float, r, t: float):
    """2 e^a exp(-r (eps r - 2 a t) / 4 t^2), the simplified far-field form."""
    r = np.asarray(r, dtype=float)
    out = 2.0 * math.exp(a) * np.exp(-r * (eps * r - 2.0 * a * t) / (4.0 * t * t))
    return float(out) if out.ndim == 0 else out
