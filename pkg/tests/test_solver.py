import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperheat.calibration import smoothing_constant
from hyperheat.errors import (
    DegenerateGridError,
    DomainError,
    EmptyRegionError,
    GridMismatchError,
    HorizonViolation,
)
from hyperheat.experiments import decaying_forcing, kernel_propagation_error, unit_source_profile
from hyperheat.kernel import KernelSpec
from hyperheat.solver import (
    ForcingTerm,
    RadialField,
    SolverConfig,
    build_grid,
    bump_field,
    distance_metrics,
    evolve,
    evolve_path,
    harnack_check,
    intersection_count,
    kernel_field,
    read_profile_csv,
    short_time_field,
    with_values,
    write_profile_csv,
)

SMALL = build_grid(3, 10.0, 200)


# --- grids ----------------------------------------------------------------------


def test_uniform_grid_spacing_and_weights():
    g = build_grid(3, 10.0, 1000)
    assert np.allclose(np.diff(g.nodes), 0.01)
    i = np.arange(1, 999)
    assert np.allclose(g.weights[i], 4 * math.pi * np.sinh(g.nodes[i]) ** 2 * 0.01, rtol=1e-12)
    assert g.weights[0] == 0.0
    assert np.all(g.weights >= 0)


def test_grid_total_weight_is_ball_volume():
    g = build_grid(3, 10.0, 1000)
    want = math.pi * (math.sinh(20.0) - 20.0)
    assert want == pytest.approx(7.617e8, rel=1e-3)
    assert g.weights.sum() == pytest.approx(want, rel=1e-4)
    assert g.cell_volumes.sum() == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("r_max, N", [(10.0, 8), (0.0, 100), (-1.0, 100)])
def test_degenerate_grids_rejected(r_max, N):
    with pytest.raises(DegenerateGridError):
        build_grid(3, r_max, N)


def test_graded_grid_is_valid_and_denser_near_pole():
    g = build_grid(3, 20.0, 400, grading="graded", focus=10.0)
    h = np.diff(g.nodes)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 20.0
    assert np.all(h > 0)
    assert h[0] < h[len(h) // 4]


def test_extended_grid_keeps_old_nodes():
    g = build_grid(3, 10.0, 100)
    e = g.extended(15.0)
    assert e.r_max >= 15.0
    assert np.array_equal(e.nodes[: g.size], g.nodes)


# --- evolution --------------------------------------------------------------------


def test_zero_data_stays_zero():
    u = evolve(RadialField(SMALL, np.zeros(SMALL.size)), 2.0)
    assert np.all(u.values == 0.0)


def test_kernel_propagation_accuracy_and_order():
    e1, d1 = kernel_propagation_error(0.01)
    e2, d2 = kernel_propagation_error(0.005)
    assert e2 <= 1e-3
    assert e1 / e2 >= 3.5
    assert max(d1, d2) <= 1e-6


def test_mass_conserved_without_forcing():
    u0 = bump_field(SMALL, 1.0)
    u = evolve(u0, 3.0)
    assert u.stats.mass_drift <= 1e-6
    assert u.cell_mass() == pytest.approx(u0.cell_mass(), rel=1e-6)


def test_horizon_violation_without_extension():
    u0 = bump_field(SMALL, 1.0)
    with pytest.raises(HorizonViolation):
        evolve(u0, 5.0, SolverConfig(extend=False))


def test_domain_extends_with_mass_line():
    u = evolve(bump_field(SMALL, 1.0), 6.0)
    assert u.grid.r_max >= 2 * 6.0 + 8 * math.sqrt(6.0)
    assert u.stats.mass_drift <= 1e-6


def test_config_validation():
    with pytest.raises(DomainError):
        SolverConfig(dt=0.0)
    with pytest.raises(DomainError):
        SolverConfig(truncation_margin=4.0)
    with pytest.raises(DomainError):
        evolve(bump_field(SMALL, 1.0), 0.0)


def _random_field(grid, seed, support=3.0):
    rng = np.random.default_rng(seed)
    vals = np.where(grid.nodes <= support, rng.random(grid.size), 0.0)
    return RadialField(grid, vals)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_positivity_preserved(seed):
    u0 = _random_field(SMALL, seed)
    for u in evolve_path(u0, [0.1, 0.5, 1.0]):
        assert u.values.min() >= -1e-12 * u0.values.max()


def _cell_l1(u, v):
    # the solver's own discrete measure, in which contraction is exact
    return float(np.dot(u.grid.cell_volumes, np.abs(u.values - v.values)))


@settings(max_examples=8)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_l1_contraction_between_runs(s1, s2):
    a, b = _random_field(SMALL, s1), _random_field(SMALL, s2)
    times = [0.25, 0.5, 1.0, 2.0]
    cell, trap = [_cell_l1(a, b)], [distance_metrics(a, b, 1)]
    for ua, ub in zip(evolve_path(a, times), evolve_path(b, times)):
        cell.append(_cell_l1(ua, ub))
        trap.append(distance_metrics(ua, ub, 1))
    assert all(y <= x * (1 + 1e-12) for x, y in zip(cell, cell[1:]))
    assert all(y <= x * (1 + 1e-5) for x, y in zip(trap, trap[1:]))


def test_intersections_never_increase():
    wide = bump_field(SMALL, 2.0)
    narrow = bump_field(SMALL, 0.5)
    times = [0.1, 0.5, 1.0, 2.0, 4.0]
    counts = [intersection_count(narrow, wide)]
    for u, v in zip(evolve_path(narrow, times), evolve_path(wide, times)):
        counts.append(intersection_count(u, v, atol=1e-300))
    assert counts[0] == 1
    assert all(y <= x for x, y in zip(counts, counts[1:]))


def test_forced_mass_balance():
    g = build_grid(3, 20.0, 400)
    u0 = kernel_field(g, 1.0)
    u = evolve(u0, 30.0, f=decaying_forcing(1.0))
    want = u0.cell_mass() + (1.0 - math.exp(-30.0))
    assert u.cell_mass() == pytest.approx(want, abs=1e-4)
    assert u.stats.forcing_input == pytest.approx(1.0 - math.exp(-30.0), abs=1e-4)


def test_unit_source_has_unit_mass():
    g = build_grid(3, 10.0, 400)
    assert g.cell_integrals(unit_source_profile).sum() == pytest.approx(1.0, rel=1e-10)


def test_forcing_must_be_finite():
    f = ForcingTerm(lambda r, t: np.full_like(r, np.nan))
    with pytest.raises(DomainError):
        evolve(bump_field(SMALL, 1.0), 0.1, f=f)


def test_smoothing_bound_with_calibrated_constant():
    C = smoothing_constant(3)
    lam = KernelSpec(3).lambda1
    times = [1.0, 5.0, 10.0, 20.0]
    for u in evolve_path(bump_field(SMALL, 1.0), times):
        assert u.values.max() <= C * u.time**-1.5 * math.exp(-lam * u.time)


# --- metrics --------------------------------------------------------------------


@pytest.mark.parametrize("p", [1, 2, 3.5, math.inf])
def test_distance_of_field_to_itself_is_zero(p):
    u = kernel_field(SMALL, 1.0)
    assert distance_metrics(u, u, p) == 0.0


def test_distance_rejects_mismatch():
    u = kernel_field(SMALL, 1.0)
    other = kernel_field(build_grid(3, 10.0, 100), 1.0)
    with pytest.raises(GridMismatchError):
        distance_metrics(u, other)
    with pytest.raises(GridMismatchError):
        distance_metrics(u, kernel_field(SMALL, 2.0))
    with pytest.raises(DomainError):
        distance_metrics(u, u, 0.5)


def test_delayed_kernels_cross_once():
    g = build_grid(3, 60.0, 4000)
    assert intersection_count(kernel_field(g, 10.0), kernel_field(g, 11.0)) == 1
    u = kernel_field(g, 10.0)
    assert intersection_count(u, u) == 0


def test_harnack_on_kernel_is_exact():
    g = build_grid(3, 40.0, 800)
    lo, hi = harnack_check(kernel_field(g, 5.0, mass=2.0), 2.0, 2.0)
    assert lo == pytest.approx(1.0, rel=1e-12) and hi == pytest.approx(1.0, rel=1e-12)


def test_harnack_ratios_stable_for_bump():
    fields = list(evolve_path(bump_field(build_grid(3, 20.0, 400), 1.0), [10.0, 20.0, 30.0]))
    ratios = [harnack_check(u, 1.0, 2.0) for u in fields]
    for lo, hi in ratios:
        assert 0 < lo <= hi < math.inf
    spread = [hi / lo for lo, hi in ratios]
    assert max(spread) <= 2.0


def test_harnack_preconditions():
    u = kernel_field(SMALL, 0.5)
    with pytest.raises(DomainError):
        harnack_check(u, 1.0, 2.0)
    with pytest.raises(DomainError):
        harnack_check(kernel_field(SMALL, 2.0), 0.0, 2.0)
    g = RadialField(SMALL, np.ones(SMALL.size), 2.0)
    with pytest.raises(EmptyRegionError):
        harnack_check(with_values(g, np.ones(SMALL.size)), 1.0, -1.0)


def test_short_time_field_has_requested_mass():
    for n in (2, 3, 4):
        g = build_grid(n, 10.0, 400)
        assert short_time_field(g, 0.05, mass=3.0).cell_mass() == pytest.approx(3.0, rel=1e-12)


# --- CSV ------------------------------------------------------------------------


def test_profile_csv_round_trip(tmp_path):
    u = kernel_field(SMALL, 1.5)
    path = tmp_path / "u.csv"
    write_profile_csv(u, path)
    text = path.read_text()
    assert text.startswith("r,value\n") and "\r" not in text
    back = read_profile_csv(path, 3, 1.5)
    assert np.array_equal(back.values, u.values)
    assert np.array_equal(back.r, u.r)


def test_profile_csv_needs_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,1\n1,2\n")
    with pytest.raises(DomainError):
        read_profile_csv(path, 3)
