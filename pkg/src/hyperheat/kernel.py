"""Heat kernels on hyperbolic space, evaluated in the log domain.

Odd dimensions are exact: n = 3 in closed form, higher odd n through the
dimension-raising recurrence

    G_{n+2}(r, t) = -exp(-n t) / (2 pi sinh r) * d/dr G_n(r, t),

with the r-derivative taken by forward-mode AD over the closed form
(nested once per step).  Written on logarithms, one step reads

    log G_{n+2} = log G_n + log w_n + log(r / sinh r) - n t - log(2 pi),
    w_n = -(d/dr log G_n) / r,

which keeps every term finite at r = 0 and at large r.  Even dimensions only
get the two-sided Davies envelope.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import dual as ad
from .errors import (
    DimensionError,
    DomainError,
    EvenDimensionUnsupported,
    NonpositiveTimeError,
)
from .quadrature import integrate_log

LOG_2PI = math.log(2.0 * math.pi)
LOG_4PI = math.log(4.0 * math.pi)


def sphere_area(n: int) -> float:
    """Surface measure of the unit (n-1)-sphere, 2 pi^(n/2) / Gamma(n/2)."""
    if int(n) != n or n < 2:
        raise DimensionError(f"dimension must be an integer >= 2, got {n}")
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class KernelSpec:
    n: int
    lambda1: float = field(init=False)
    omega_n: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise DimensionError(f"dimension must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lambda1", (self.n - 1) ** 2 / 4)
        object.__setattr__(self, "omega_n", sphere_area(self.n))

    @property
    def odd(self) -> bool:
        return self.n % 2 == 1


@dataclass(frozen=True)
class LogScalar:
    """A nonnegative number stored as its natural logarithm."""

    log_mag: float
    is_zero: bool = False

    @classmethod
    def from_log(cls, x: float) -> "LogScalar":
        x = float(x)
        if x == -math.inf:
            return cls(-math.inf, True)
        return cls(x, False)

    @property
    def value(self) -> float:
        if self.is_zero:
            return 0.0
        try:
            return math.exp(self.log_mag)
        except OverflowError:
            return math.inf

    def __mul__(self, other: "LogScalar") -> "LogScalar":
        if self.is_zero or other.is_zero:
            return LogScalar(-math.inf, True)
        return LogScalar(self.log_mag + other.log_mag)

    def __truediv__(self, other: "LogScalar") -> "LogScalar":
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogScalar")
        if self.is_zero:
            return self
        return LogScalar(self.log_mag - other.log_mag)


@dataclass(frozen=True)
class DaviesEnvelope:
    """Two-sided bound c_lower * h_n <= G_n <= c_upper * h_n."""

    spec: KernelSpec
    c_lower: float
    c_upper: float

    def __post_init__(self):
        lo, hi = self.c_lower, self.c_upper
        if not (0 < lo <= hi < math.inf):
            raise DomainError(f"need 0 < c_lower <= c_upper < inf, got {lo}, {hi}")

    def log_lower(self, r, t):
        return math.log(self.c_lower) + log_davies(self.spec, r, t)

    def log_upper(self, r, t):
        return math.log(self.c_upper) + log_davies(self.spec, r, t)


def _quiet(fn):
    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        with np.errstate(all="ignore"):
            return fn(*args, **kwargs)

    return wrapped


def _check_time(t):
    if np.any(np.asarray(ad.primal(t)) <= 0):
        raise NonpositiveTimeError(f"time must be positive, got {t}")


def _check_radius(r):
    if np.any(np.asarray(ad.primal(r)) < 0):
        raise DomainError("radius must be nonnegative")


def _as_scalar(x) -> LogScalar:
    return LogScalar.from_log(float(np.asarray(x)))


# --- geometry -------------------------------------------------------------


@_quiet
def geodesic_distance(r, a, theta):
    """Distance between points at radii r, a that subtend angle theta at the pole.

    Uses sinh^2(L/2) = sinh^2((r-a)/2) + sinh r sinh a sin^2(theta/2), which is
    the law of cosines without the cancellation near theta = 0, and evaluates
    it in logs so large radii do not overflow.
    """
    r, a, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, a, theta)))
    if np.any(r < 0) or np.any(a < 0):
        raise DomainError("radii must be nonnegative")
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise DomainError("angle must lie in [0, pi]")
    half = 0.5 * np.abs(r - a)
    log_first = 2.0 * _log_sinh_np(half)
    log_second = (
        _log_sinh_np(r) + _log_sinh_np(a) + 2.0 * np.log(np.abs(np.sin(0.5 * theta)))
    )
    log_s2 = np.logaddexp(log_first, log_second)
    log_s = 0.5 * log_s2
    out = np.where(
        log_s > 20.0,
        2.0 * (math.log(2.0) + log_s + np.log1p(np.exp(-2.0 * log_s) / 4.0)),
        2.0 * np.arcsinh(np.exp(np.minimum(log_s, 20.0))),
    )
    return float(out) if out.ndim == 0 else out


def _log_sinh_np(x):
    x = np.asarray(x, dtype=float)
    big = x > 20.0
    with np.errstate(all="ignore"):
        return np.where(
            big,
            x - math.log(2.0) + np.log1p(-np.exp(-2.0 * x)),
            np.log(np.sinh(np.where(big, 1.0, x))),
        )


@_quiet
def log_volume_weight_array(spec: KernelSpec, r):
    """log(omega_n sinh^(n-1) r) elementwise; -inf at r = 0."""
    r = np.asarray(r, dtype=float)
    _check_radius(r)
    return math.log(spec.omega_n) + (spec.n - 1) * _log_sinh_np(r)


def log_volume_weight(spec: KernelSpec, r: float) -> LogScalar:
    return _as_scalar(log_volume_weight_array(spec, r))


# --- 1D Gaussian ------------------------------------------------------------


def _log_gaussian_expr(x, t):
    return -0.5 * ad.log(4.0 * math.pi * t) - x * x / (4.0 * t)


@_quiet
def log_gaussian1d(x, t):
    """log E_1(x, t) = -log(4 pi t)/2 - x^2 / 4t, elementwise."""
    _check_time(t)
    return _log_gaussian_expr(np.asarray(x, dtype=float), t)


def gaussian1d_log(x: float, t: float) -> LogScalar:
    return _as_scalar(log_gaussian1d(x, t))


def gaussian1d(x, t):
    return np.exp(log_gaussian1d(x, t))


# --- exact kernels in odd dimensions ---------------------------------------


def _log_g3_expr(r, t):
    return -1.5 * ad.log(4.0 * math.pi * t) - t + ad.log_x_over_sinh(r) - r * r / (4.0 * t)


# Near the pole every log-kernel is an even analytic function of r, so it is
# carried there as a truncated power series in s = r^2.  The recurrence weight
# w_n = -2 d/ds log G_n is then exact coefficient arithmetic, whereas the AD
# route divides nested tangents by r and loses all digits as r -> 0.
POLE_RADIUS = 0.5
_POLE_TERMS = 16


def _series_log(a: list) -> list:
    """Power-series coefficients of log A(s) from those of A(s), a[0] > 0."""
    b = [ad.log(a[0])]
    for k in range(1, len(a)):
        acc = k * a[k]
        for j in range(1, k):
            acc = acc - j * b[j] * a[k - j]
        b.append(acc / (k * a[0]))
    return b


def _pole_series(n: int, t, base: int) -> list:
    steps = (n - base) // 2
    m = _POLE_TERMS + steps
    shape = [0.0] + ad.log_x_over_sinh_coeffs(m - 1)
    if base == 1:
        L = [-0.5 * ad.log(4.0 * math.pi * t), -1.0 / (4.0 * t)] + [0.0] * (m - 2)
    else:
        L = list(shape)
        L[0] = -1.5 * ad.log(4.0 * math.pi * t) - t
        L[1] = L[1] - 1.0 / (4.0 * t)
    dim = base
    for _ in range(steps):
        w = [-2.0 * (k + 1) * L[k + 1] for k in range(len(L) - 1)]
        L = [lw + lk + sk for lw, lk, sk in zip(_series_log(w), L, shape)]
        L[0] = L[0] - dim * t - LOG_2PI
        dim += 2
    return L


def _pole_value(n: int, r, t, base: int):
    coeffs = _pole_series(n, t, base)
    s = r * r
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * s + c
    return acc


def _log_kernel_expr(n: int, r, t, base: int = 3):
    """Log-kernel as an AD-transparent expression of (r, t)."""
    if n == base:
        return _log_gaussian_expr(r, t) if base == 1 else _log_g3_expr(r, t)
    near = np.abs(ad.primal(r)) < POLE_RADIUS
    if np.all(near):
        return _pole_value(n, r, t, base)
    far_r = ad.where(near, POLE_RADIUS, r) if np.any(near) else r
    m = n - 2
    value, slope = ad.value_and_derivative(lambda x: _log_kernel_expr(m, x, t, base), far_r)
    w = -slope / far_r
    far = value + ad.log(w) + ad.log_x_over_sinh(far_r) - m * t - LOG_2PI
    if not np.any(near):
        return far
    return ad.where(near, _pole_value(n, r, t, base), far)


def _require_odd(spec: KernelSpec):
    if not spec.odd:
        raise EvenDimensionUnsupported(
            f"exact kernel needs odd n; n={spec.n} only supports the Davies envelope"
        )


@_quiet
def log_kernel(spec: KernelSpec, r, t, base: int = 3):
    """log G_n(r, t) elementwise for odd n.

    ``base`` selects the closed form the recurrence starts from: 3 (default)
    or 1, the Euclidean Gaussian on the line.
    """
    _require_odd(spec)
    if base not in (1, 3) or base > spec.n:
        raise DimensionError(f"recurrence base must be 1 or 3 (<= n), got {base}")
    _check_time(t)
    r = np.asarray(r, dtype=float)
    _check_radius(r)
    out = _log_kernel_expr(spec.n, r, float(t), base)
    return out


def kernel_log(spec: KernelSpec, r: float, t: float, base: int = 3) -> LogScalar:
    return _as_scalar(log_kernel(spec, r, t, base))


def kernel(spec: KernelSpec, r, t):
    return np.exp(log_kernel(spec, r, t))


@_quiet
def dlog_kernel_dt(spec: KernelSpec, r, t):
    """Exact time derivative of log G_n at fixed r (forward-mode in t)."""
    _require_odd(spec)
    _check_time(t)
    r = np.asarray(r, dtype=float)
    return ad.derivative(lambda s: _log_kernel_expr(spec.n, r, s), float(t))


@_quiet
def dlog_kernel_dr(spec: KernelSpec, r, t):
    _require_odd(spec)
    _check_time(t)
    r = np.asarray(r, dtype=float)
    return ad.derivative(lambda x: _log_kernel_expr(spec.n, x, float(t)), r)


# --- Davies envelope ----------------------------------------------------------


@_quiet
def log_davies(spec: KernelSpec, r, t):
    """log h_n(r, t) with the exponent in completed-square form."""
    _check_time(t)
    r = np.asarray(r, dtype=float)
    _check_radius(r)
    n = spec.n
    return (
        -0.5 * n * np.log(4.0 * math.pi * t)
        - (r + (n - 1) * t) ** 2 / (4.0 * t)
        + 0.5 * (n - 3) * np.log1p(r + t)
        + np.log1p(r)
    )


def davies_log(spec: KernelSpec, r: float, t: float) -> LogScalar:
    return _as_scalar(log_davies(spec, r, t))


def davies_ratio_n3(r):
    """Exact G_3 / h_3 = 2r / ((1 + r)(1 - e^{-2r})), with value 1 at r = 0."""
    r = np.asarray(r, dtype=float)
    with np.errstate(all="ignore"):
        safe = np.where(r == 0, 1.0, r)
        out = 2.0 * safe / ((1.0 + safe) * -np.expm1(-2.0 * safe))
    return np.where(r == 0, 1.0, out)


def davies_envelope(spec: KernelSpec) -> DaviesEnvelope:
    from .calibration import davies_constants

    lo, hi = davies_constants(spec.n)
    return DaviesEnvelope(spec, lo, hi)


# --- profiles and densities -------------------------------------------------


@_quiet
def log_weighted_density(spec: KernelSpec, r, t):
    """log rho(r, t) = log(omega_n sinh^(n-1) r G_n(r, t)); -inf at r = 0."""
    return log_volume_weight_array(spec, r) + log_kernel(spec, r, t)


def weighted_density_log(spec: KernelSpec, r: float, t: float) -> LogScalar:
    return _as_scalar(log_weighted_density(spec, r, t))


def q_profile(spec: KernelSpec, r, t_large: float = 1e4, richardson_tol: float = 1e-7):
    """Limit of t^{3/2} e^{lambda1 t} G_n(r, t) as t grows.

    Exact for n = 3.  For other odd n the weighted kernel has an O(1/t)
    error, so it is sampled at t_large, 2 t_large, 4 t_large and extrapolated
    by Richardson; the two extrapolants must agree to ``richardson_tol``.
    """
    _require_odd(spec)
    r = np.asarray(r, dtype=float)
    _check_radius(r)
    if spec.n == 3:
        out = (4.0 * math.pi) ** -1.5 * np.exp(ad.log_x_over_sinh(r))
        return float(out) if out.ndim == 0 else out

    def weighted(t):
        return np.exp(log_kernel(spec, r, t) + 1.5 * math.log(t) + spec.lambda1 * t)

    q1, q2, q4 = (weighted(k * t_large) for k in (1.0, 2.0, 4.0))
    coarse, fine = 2.0 * q2 - q1, 2.0 * q4 - q2
    if np.any(np.abs(fine - coarse) > richardson_tol * np.abs(fine)):
        raise DomainError("weighted kernel has not settled; raise t_large")
    return float(fine) if fine.ndim == 0 else fine


def mass_window(spec: KernelSpec, t: float, margin: float = 12.0) -> float:
    """Right end of the truncated radial domain, (n-1) t + margin sqrt(t)."""
    return (spec.n - 1) * t + margin * math.sqrt(t)


def davies_tail_bound(spec: KernelSpec, t: float, r_from: float) -> float:
    """Upper bound on the kernel mass beyond r_from, from the Davies envelope."""
    c_upper = davies_envelope(spec).c_upper
    end = r_from + 40.0 * math.sqrt(t) + 40.0
    value, _, _ = integrate_log(
        lambda r: log_volume_weight_array(spec, r) + log_davies(spec, r, t),
        r_from,
        end,
        abs_tol=1e-12,
    )
    return c_upper * value


@dataclass(frozen=True)
class MassResult:
    mass: float
    quad_error: float
    tail_bound: float


def kernel_mass(spec: KernelSpec, t: float, r_max: float | None = None,
                abs_tol: float = 1e-10) -> MassResult:
    """Total kernel mass on [0, r_max] by adaptive quadrature of rho.

    ``tail_bound`` estimates the mass beyond r_max from the Davies envelope.
    """
    _require_odd(spec)
    _check_time(t)
    floor = mass_window(spec, t)
    if r_max is None:
        r_max = floor
    if r_max < (spec.n - 1) * t + 12.0 * math.sqrt(t) - 1e-12:
        raise DomainError(f"r_max must be >= (n-1)t + 12 sqrt(t) = {floor:.6g}")
    center = (spec.n - 1) * t
    bps = [p for p in (center - 6 * math.sqrt(t), center, center + 6 * math.sqrt(t))
           if 0 < p < r_max]
    value, err, _ = integrate_log(
        lambda r: log_weighted_density(spec, r, t), 0.0, r_max,
        abs_tol=abs_tol, breakpoints=bps,
    )
    return MassResult(value, err, davies_tail_bound(spec, t, r_max))
