"""Crank-Nicolson solver for radial heat flow on H^n, plus field metrics.

The operator (sinh r)^{1-n} ((sinh r)^{n-1} u_r)_r is discretised in flux
form on cells around each node: face areas omega_n sinh^{n-1} at the
midpoints and exact cell volumes.  The sum of cell-volume-weighted values is
then conserved up to the flux through the Dirichlet node at r_max, and the
pole needs no special treatment because the face area vanishes there.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Literal

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .errors import (
    DegenerateGridError,
    DomainError,
    EmptyRegionError,
    GridMismatchError,
    HorizonViolation,
    InstabilityDetected,
)
from .kernel import KernelSpec, log_kernel
from .quadrature import gauss_legendre


@dataclass(frozen=True, eq=False)
class RadialGrid:
    n: int
    nodes: np.ndarray
    weights: np.ndarray = field(init=False, repr=False)
    density: np.ndarray = field(init=False, repr=False)
    cell_volumes: np.ndarray = field(init=False, repr=False)
    face_areas: np.ndarray = field(init=False, repr=False)
    cell_points: np.ndarray = field(init=False, repr=False)
    cell_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        spec = KernelSpec(self.n)
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or r.size < 17 or r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise DegenerateGridError("nodes must start at 0, increase strictly, N >= 16")
        w = spec.omega_n * np.sinh(r) ** (self.n - 1)
        h = np.diff(r)
        trap = np.zeros_like(r)
        trap[:-1] += 0.5 * h
        trap[1:] += 0.5 * h
        weights = w * trap
        faces = np.concatenate([[0.0], 0.5 * (r[:-1] + r[1:]), [r[-1]]])
        x, qw = gauss_legendre(6, faces[:-1], faces[1:])
        qw = qw * spec.omega_n * np.sinh(x) ** (self.n - 1)
        volumes = np.sum(qw, axis=1)
        areas = spec.omega_n * np.sinh(faces[1:-1]) ** (self.n - 1)
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(volumes))):
            raise DegenerateGridError(f"r_max={r[-1]:g} overflows the volume element for n={self.n}")
        r.flags.writeable = False
        for name, arr in (("nodes", r), ("weights", weights), ("density", w),
                          ("cell_volumes", volumes),
                          ("face_areas", areas), ("cell_points", x),
                          ("cell_weights", qw)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return self.nodes.size

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.n == other.n and self.size == other.size
            and np.array_equal(self.nodes, other.nodes)
        )

    def cell_integrals(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """int fn dmu over each node's cell (6-point Gauss-Legendre)."""
        return np.sum(self.cell_weights * fn(self.cell_points), axis=1)

    def extended(self, r_max: float) -> "RadialGrid":
        """Append nodes at the last spacing until r_max is covered."""
        h = self.nodes[-1] - self.nodes[-2]
        extra = int(math.ceil((r_max - self.r_max) / h))
        if extra <= 0:
            return self
        tail = self.r_max + h * np.arange(1, extra + 1)
        return RadialGrid(self.n, np.concatenate([self.nodes, tail]))


def build_grid(n: int, r_max: float, N: int,
               grading: Literal["uniform", "graded"] = "uniform",
               focus: float | None = None, strength: float = 4.0) -> RadialGrid:
    """Grid of N + 1 nodes on [0, r_max].

    ``graded`` puts up to ``strength`` times more nodes near r = 0 and near
    ``focus`` (default: the middle of the interval), by inverting a
    cumulative node density.
    """
    if not (r_max > 0) or N < 16:
        raise DegenerateGridError(f"need r_max > 0 and N >= 16, got r_max={r_max}, N={N}")
    if grading == "uniform":
        return RadialGrid(n, np.linspace(0.0, r_max, N + 1))
    if grading != "graded":
        raise DomainError(f"unknown grading {grading!r}")
    focus = 0.5 * r_max if focus is None else focus
    width = 0.1 * r_max
    fine = np.linspace(0.0, r_max, 20 * N + 1)
    density = 1.0 + (strength - 1.0) * (
        np.exp(-(fine / width) ** 2) + np.exp(-((fine - focus) / width) ** 2)
    )
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(fine))])
    nodes = np.interp(np.linspace(0.0, cum[-1], N + 1), cum, fine)
    nodes[0], nodes[-1] = 0.0, r_max
    return RadialGrid(n, nodes)


@dataclass(frozen=True)
class SolverStats:
    mass_initial: float
    mass_final: float
    forcing_input: float
    boundary_loss: float
    steps: int
    dt: float
    max_step_drift: float

    @property
    def mass_drift(self) -> float:
        """Relative change of mass not explained by the forcing."""
        scale = max(abs(self.mass_initial), 1e-300)
        return abs(self.mass_final - self.mass_initial - self.forcing_input) / scale


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    values: np.ndarray
    time: float = 0.0
    stats: SolverStats | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise GridMismatchError("values must match the grid nodes")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        if self.time < 0:
            raise DomainError("time must be nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def mass(self) -> float:
        """Trapezoidal mass on the grid."""
        return float(np.dot(self.grid.weights, self.values))

    def cell_mass(self) -> float:
        """Mass in the solver's finite-volume sense (the conserved quantity)."""
        return float(np.dot(self.grid.cell_volumes, self.values))

    @classmethod
    def from_function(cls, grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray],
                      time: float = 0.0) -> "RadialField":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float), time)


def kernel_field(grid: RadialGrid, t: float, mass: float = 1.0) -> RadialField:
    """The exact heat kernel G_n(., t) sampled on the grid (odd n)."""
    spec = KernelSpec(grid.n)
    return RadialField(grid, mass * np.exp(log_kernel(spec, grid.nodes, t)), t)


def bump_field(grid: RadialGrid, radius: float, mass: float = 1.0) -> RadialField:
    """Uniform density on the geodesic ball of given radius with exact discrete mass."""
    inside = grid.nodes <= radius + 1e-12
    vals = inside.astype(float)
    vals *= mass / np.dot(grid.cell_volumes, vals)
    return RadialField(grid, vals, 0.0)


def short_time_field(grid: RadialGrid, t0: float, mass: float = 1.0) -> RadialField:
    """Euclidean Gaussian approximation of the kernel at a small time t0.

    Works in every dimension (the even ones included) and is normalised to
    the requested discrete mass.
    """
    vals = np.exp(-grid.nodes**2 / (4.0 * t0))
    vals *= mass / np.dot(grid.cell_volumes, vals)
    return RadialField(grid, vals, t0)


@dataclass(frozen=True)
class ForcingTerm:
    evaluator: Callable[[np.ndarray, float], np.ndarray]
    declared_total: float | None = None

    def __call__(self, r: np.ndarray, t: float) -> np.ndarray:
        out = np.asarray(self.evaluator(r, t), dtype=float)
        if not np.all(np.isfinite(out)):
            raise DomainError(f"forcing is not finite at t={t}")
        return np.broadcast_to(out, r.shape)


@dataclass(frozen=True)
class SolverConfig:
    scheme: Literal["crank_nicolson"] = "crank_nicolson"
    dt: float | None = None
    dt_cap: float = 1e-2
    truncation_margin: float = 8.0
    extend: bool = True
    max_r: float = 600.0
    rannacher_steps: int = 2
    growth_limit: float = 1e3

    def __post_init__(self):
        if self.scheme != "crank_nicolson":
            raise DomainError(f"unsupported scheme {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.truncation_margin < 8:
            raise DomainError("truncation_margin must be >= 8")

    def step_for(self, grid: RadialGrid) -> float:
        if self.dt is not None:
            return self.dt
        h = float(np.median(np.diff(grid.nodes)))
        return min(0.5 * h, self.dt_cap)


class _Operator:
    """Tridiagonal flux operator restricted to the unknowns 0..N-1."""

    def __init__(self, grid: RadialGrid):
        r = grid.nodes
        h = np.diff(r)
        coup = grid.face_areas / h  # between node i and i+1, i = 0..N-1
        vol = grid.cell_volumes[:-1]
        m = vol.size
        lower = coup[: m - 1]
        upper = coup[: m - 1]
        main = -(coup[:m] + np.concatenate([[0.0], coup[: m - 1]]))
        self.grid = grid
        self.vol = vol
        self.out_coupling = coup[m - 1]
        self.K = diags([lower, main, upper], [-1, 0, 1], format="csc")
        self._lu: dict[float, object] = {}

    def solver(self, theta_dt: float):
        lu = self._lu.get(theta_dt)
        if lu is None:
            lhs = diags(self.vol) - theta_dt * self.K
            lu = splu(lhs.tocsc())
            self._lu[theta_dt] = lu
        return lu


def _needs_room(grid: RadialGrid, n: int, t: float, margin: float) -> bool:
    s = math.sqrt(max(t, 0.0))
    return grid.r_max - ((n - 1) * t + margin * s) < 2.0 * s


def _room_target(n: int, t: float, margin: float) -> float:
    ahead = t + max(1.0, 0.25 * t)
    s = math.sqrt(ahead)
    return (n - 1) * ahead + margin * s + 2.0 * s + 1.0


def _remap(u: RadialField, grid: RadialGrid) -> np.ndarray:
    out = np.zeros(grid.size)
    out[: u.grid.size] = u.values
    return out


def evolve_path(u0: RadialField, times: Iterable[float], config: SolverConfig | None = None,
                f: ForcingTerm | None = None) -> Iterator[RadialField]:
    """Yield the solution at each requested elapsed time (increasing).

    Steps of (nearly) equal length are taken between outputs.  The grid is
    extended whenever the mass line (n-1)t plus the truncation margin comes
    within 2 sqrt(t) of r_max; grids therefore depend only on the start grid,
    the times and the config, so two runs with the same inputs share them.
    """
    config = config or SolverConfig()
    grid = u0.grid
    n = grid.n
    t = u0.time
    u = np.array(u0.values, dtype=float)
    u[-1] = 0.0
    scale = np.max(np.abs(u)) if u.size else 0.0
    mass0 = float(np.dot(grid.cell_volumes, u))
    forcing_in = 0.0
    boundary_loss = 0.0
    max_step_drift = 0.0
    steps_taken = 0
    op = _Operator(grid)
    done_rannacher = 0
    elapsed = 0.0
    dt_nominal = config.step_for(grid)

    def source(tt):
        # cell integrals of f, so the discrete input matches int f dmu
        if f is None:
            return None
        return op.grid.cell_integrals(lambda x: f(x, tt))[:-1]

    for target in times:
        if target < elapsed - 1e-12:
            raise DomainError("output times must be increasing")
        span = target - elapsed
        nsteps = int(math.ceil(span / dt_nominal - 1e-9)) if span > 0 else 0
        dt = span / nsteps if nsteps else 0.0
        for _ in range(nsteps):
            if _needs_room(op.grid, n, t + dt, config.truncation_margin):
                if not config.extend:
                    raise HorizonViolation(
                        f"mass line reaches r_max={op.grid.r_max:g} at t={t + dt:g}"
                    )
                want = _room_target(n, t + dt, config.truncation_margin)
                if want > config.max_r:
                    raise HorizonViolation(f"domain would exceed max_r={config.max_r:g}")
                new_grid = op.grid.extended(want)
                u = _remap(RadialField(op.grid, u, t), new_grid)
                op = _Operator(new_grid)
            vol = op.vol
            before = float(np.dot(vol, u[:-1]))
            if done_rannacher < config.rannacher_steps:
                sub = [(0.5 * dt, 1.0)] * 2
                done_rannacher += 1
            else:
                sub = [(dt, 0.5)]
            for h_t, theta in sub:
                rhs = vol * u[:-1]
                if theta < 1.0:
                    rhs = rhs + (1.0 - theta) * h_t * (op.K @ u[:-1])
                s0 = source(t)
                s1 = source(t + h_t)
                if s0 is not None:
                    fin = 0.5 * h_t * (s0 + s1)
                    rhs = rhs + fin
                    forcing_in += float(np.sum(fin))
                new = op.solver(theta * h_t).solve(rhs)
                loss = h_t * op.out_coupling * (theta * new[-1] + (1.0 - theta) * u[-2])
                boundary_loss += loss
                u[:-1] = new
                t += h_t
            steps_taken += 1
            after = float(np.dot(vol, u[:-1]))
            if not np.all(np.isfinite(u)):
                raise InstabilityDetected(f"non-finite values at t={t:g}")
            bound = config.growth_limit * (scale + 1.0 if f is not None else scale)
            if bound > 0 and np.max(np.abs(u)) > bound:
                raise InstabilityDetected(f"values grew beyond {bound:g} at t={t:g}")
            if f is None and before != 0.0:
                max_step_drift = max(max_step_drift, abs(after - before) / abs(before))
        elapsed = target
        mass = float(np.dot(op.grid.cell_volumes, u))
        stats = SolverStats(mass0, mass, forcing_in, boundary_loss, steps_taken,
                            dt if nsteps else dt_nominal, max_step_drift)
        yield RadialField(op.grid, u.copy(), u0.time + target, stats)


def evolve(u0: RadialField, T: float, config: SolverConfig | None = None,
           f: ForcingTerm | None = None) -> RadialField:
    """Advance ``u0`` by elapsed time T."""
    if not T > 0:
        raise DomainError("T must be positive")
    *_, last = evolve_path(u0, [T], config, f)
    return last


# --- metrics ------------------------------------------------------------------


def _check_pair(u: RadialField, v: RadialField, same_time: bool = True):
    if not u.grid.same_as(v.grid):
        raise GridMismatchError("fields live on different grids")
    if same_time and not math.isclose(u.time, v.time, rel_tol=1e-12, abs_tol=1e-12):
        raise GridMismatchError(f"fields are at different times {u.time} and {v.time}")


def distance_metrics(u: RadialField, v: RadialField, p: float = 1) -> float:
    """||u - v|| in L^p(d mu) by grid quadrature; p = inf is a plain sup."""
    _check_pair(u, v)
    d = np.abs(u.values - v.values)
    if p == math.inf:
        return float(np.max(d))
    if p < 1:
        raise DomainError("p must be >= 1")
    if p == 1:
        return float(np.dot(u.grid.weights, d))
    return float(np.dot(u.grid.weights, d**p) ** (1.0 / p))


def intersection_count(u: RadialField, v: RadialField, atol: float = 0.0) -> int:
    """Sign changes of u - v along the nodes.

    Differences with magnitude <= atol count as zeros; runs of zeros are
    skipped, so a touching zero between equal signs is not a crossing.
    """
    _check_pair(u, v, same_time=False)
    d = u.values - v.values
    s = np.sign(d[np.abs(d) > atol])
    if s.size < 2:
        return 0
    return int(np.count_nonzero(s[1:] != s[:-1]))


def harnack_check(u: RadialField, M: float, L: float) -> tuple[float, float]:
    """min and max of u / (M G_t) over nodes with r <= L t."""
    if u.time < 1:
        raise DomainError("harnack_check needs u.time >= 1")
    if not M > 0:
        raise DomainError("mass M must be positive")
    mask = u.r <= L * u.time
    if not np.any(mask):
        raise EmptyRegionError(f"no nodes with r <= {L * u.time:g}")
    spec = KernelSpec(u.grid.n)
    ref = M * np.exp(log_kernel(spec, u.r[mask], u.time))
    ratio = u.values[mask] / ref
    return float(np.min(ratio)), float(np.max(ratio))


# --- CSV ------------------------------------------------------------------------


def write_profile_csv(u: RadialField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "value"])
        for r, v in zip(u.r, u.values):
            w.writerow([f"{r:.17g}", f"{v:.17g}"])


def read_profile_csv(path, n: int, time: float = 0.0) -> RadialField:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["r", "value"]:
        raise DomainError("profile CSV needs the header row 'r,value'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return RadialField(RadialGrid(n, data[:, 0]), data[:, 1], time)


def with_values(u: RadialField, values: np.ndarray) -> RadialField:
    return replace(u, values=values, stats=None)
