"""Horospheric solutions: functions of the half-space height y only.

With z = log y they solve v_t = v_zz - (n-1) v_z, whose solution is a
Gaussian convolution translated by (n-1) t.  No time stepping is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonintegrableDataError
from .kernel import KernelSpec, gaussian1d


def y_to_z(y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("height y must be positive")
    return np.log(y)


def z_to_y(z):
    return np.exp(np.asarray(z, dtype=float))


@dataclass(frozen=True, eq=False)
class HoroField:
    """v(z, t) sampled on a uniform z-grid, or a point mass (``atom``)."""

    z: np.ndarray
    values: np.ndarray
    time: float
    n: int
    atom: tuple[float, float] | None = None  # (location, mass)

    def __post_init__(self):
        KernelSpec(self.n)
        z = np.asarray(self.z, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if z.ndim != 1 or z.size < 3 or np.any(np.diff(z) <= 0):
            raise DomainError("z must be an increasing 1-D grid")
        if v.shape != z.shape or not np.all(np.isfinite(v)):
            raise DomainError("values must be finite and match the grid")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return float(self.z[1] - self.z[0])

    def mass(self) -> float:
        if self.atom is not None:
            return self.atom[1]
        return float(np.trapezoid(self.values, self.z))

    @classmethod
    def point_mass(cls, z, n: int, at: float = 0.0, mass: float = 1.0) -> "HoroField":
        z = np.asarray(z, dtype=float)
        return cls(z, np.zeros_like(z), 0.0, n, atom=(at, mass))

    @classmethod
    def from_function(cls, z, fn, n: int, time: float = 0.0) -> "HoroField":
        z = np.asarray(z, dtype=float)
        return cls(z, fn(z), time, n)


def _default_output_grid(v0: HoroField, T: float) -> np.ndarray:
    shift = (v0.n - 1) * T
    pad = 10.0 * math.sqrt(T)
    h = v0.h
    lo = v0.z[0] + shift - pad
    count = int(math.ceil((v0.z[-1] - v0.z[0] + 2 * pad) / h)) + 1
    return lo + h * np.arange(count)


def exact_drift_solution(v0: HoroField, T: float, z_out=None,
                         tail_tol: float = 1e-10) -> HoroField:
    """v(z, t0 + T) = int v0(zeta) E_1(z - (n-1) T - zeta, T) d zeta.

    Grid data are convolved by the trapezoid rule.  The data must be
    integrable in the sense of the 1-D condition: they must be negligible
    (relative ``tail_tol``) at both ends of their grid.
    """
    if not T > 0:
        raise DomainError("T must be positive")
    z_out = _default_output_grid(v0, T) if z_out is None else np.asarray(z_out, dtype=float)
    c = v0.n - 1
    if v0.atom is not None:
        at, m = v0.atom
        if not math.isfinite(m):
            raise NonintegrableDataError("point mass must be finite")
        vals = m * gaussian1d(z_out - at - c * T, T + 0.0)
        return HoroField(z_out, vals, v0.time + T, v0.n, None)

    peak = np.max(np.abs(v0.values))
    if not math.isfinite(v0.mass()) or peak == 0 and v0.mass() != 0:
        raise NonintegrableDataError("data are not integrable")
    if peak > 0 and max(abs(v0.values[0]), abs(v0.values[-1])) > tail_tol * peak:
        raise NonintegrableDataError("data do not decay at the ends of their grid")
    w = np.full(v0.z.size, v0.h)
    w[0] = w[-1] = 0.5 * v0.h
    # chunked to bound memory on long grids
    out = np.empty(z_out.size)
    step = max(1, 4_000_000 // v0.z.size)
    for i in range(0, z_out.size, step):
        zz = z_out[i:i + step, None]
        out[i:i + step] = gaussian1d(zz - c * T - v0.z[None, :], T) @ (w * v0.values)
    return HoroField(z_out, out, v0.time + T, v0.n)


def horo_error(v: HoroField) -> float:
    """sup_z |sqrt(t) v(z, t) - E_1(xi, 1)|, xi = (z - (n-1) t) / sqrt(t)."""
    t = v.time
    if not t > 0:
        raise DomainError("field must be at positive time")
    xi = (v.z - (v.n - 1) * t) / math.sqrt(t)
    return float(np.max(np.abs(math.sqrt(t) * v.values - gaussian1d(xi, 1.0))))


def peak_location(v: HoroField) -> float:
    """Argmax of v refined by a parabola through the three top samples."""
    i = int(np.argmax(v.values))
    if i == 0 or i == v.z.size - 1:
        return float(v.z[i])
    y0, y1, y2 = v.values[i - 1:i + 2]
    denom = y0 - 2 * y1 + y2
    off = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    return float(v.z[i] + off * v.h)


def drift_speed(v0: HoroField, t: float) -> float:
    """Speed of the peak between times t and 2t (elapsed from v0)."""
    a = exact_drift_solution(v0, t)
    b = exact_drift_solution(v0, 2 * t)
    return (peak_location(b) - peak_location(a)) / t


def pde_residual(v0: HoroField, T: float, z: np.ndarray, dt: float = 1e-4) -> np.ndarray:
    """Central-difference residual of v_t - v_zz + (n-1) v_z on a uniform z grid."""
    z = np.asarray(z, dtype=float)
    h = z[1] - z[0]
    c = v0.n - 1
    now = exact_drift_solution(v0, T, z).values
    ahead = exact_drift_solution(v0, T + dt, z).values
    behind = exact_drift_solution(v0, T - dt, z).values
    vt = (ahead - behind) / (2 * dt)
    vzz = (now[2:] - 2 * now[1:-1] + now[:-2]) / h**2
    vz = (now[2:] - now[:-2]) / (2 * h)
    return vt[1:-1] - vzz + c * vz
