import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperheat.errors import DomainError, NonintegrableDataError
from hyperheat.horo import (
    HoroField,
    drift_speed,
    exact_drift_solution,
    horo_error,
    pde_residual,
    peak_location,
    y_to_z,
    z_to_y,
)
from hyperheat.kernel import gaussian1d

Z = np.arange(-12.0, 12.0 + 1e-9, 0.02)


def gaussian_data(n):
    return HoroField.from_function(Z, lambda z: gaussian1d(z, 1.0), n)


def indicator_data(n, z=Z):
    return HoroField.from_function(z, lambda z: 0.5 * (np.abs(z) <= 1.0), n)


def test_height_transform_round_trip():
    y = np.array([1e-3, 0.5, 1.0, 7.0])
    assert np.allclose(z_to_y(y_to_z(y)), y, rtol=1e-15)
    with pytest.raises(DomainError):
        y_to_z([0.0])


def test_point_mass_solution_is_translated_gaussian():
    z = np.linspace(-10.0, 30.0, 4001)
    v = exact_drift_solution(HoroField.point_mass(z, 3), 5.0, z)
    assert np.allclose(v.values, gaussian1d(z - 10.0, 5.0), rtol=0, atol=1e-16)
    assert peak_location(v) == pytest.approx(10.0, abs=1e-9)
    assert v.time == 5.0


@pytest.mark.parametrize("t", [0.5, 3.0, 40.0])
def test_point_mass_is_self_similar(t):
    z = np.linspace(-20.0, 2 * t + 20 * math.sqrt(t), 3001)
    v = exact_drift_solution(HoroField.point_mass(z, 3), t, z)
    assert horo_error(v) <= 1e-10


@pytest.mark.parametrize("n, T", [(2, 3.0), (3, 5.0), (5, 2.0)])
def test_gaussian_data_semigroup(n, T):
    v = exact_drift_solution(gaussian_data(n), T)
    want = gaussian1d(v.z - (n - 1) * T, T + 1.0)
    assert np.max(np.abs(v.values - want)) <= 1e-12
    assert v.mass() == pytest.approx(1.0, abs=1e-8)


def test_indicator_peak_drifts_with_speed_one():
    z = np.arange(-6.0, 6.0 + 1e-9, 0.01)
    v = exact_drift_solution(indicator_data(2, z), 100.0)
    assert peak_location(v) == pytest.approx(100.0, abs=0.5)


@pytest.mark.parametrize("n", [2, 3])
def test_horo_error_at_100_for_gaussian_data(n):
    v = exact_drift_solution(gaussian_data(n), 100.0)
    assert horo_error(v) <= 0.01


def test_horo_error_decreases_for_bump():
    z = np.arange(-6.0, 6.0 + 1e-9, 0.01)
    e10 = horo_error(exact_drift_solution(indicator_data(3, z), 10.0))
    e100 = horo_error(exact_drift_solution(indicator_data(3, z), 100.0))
    assert e10 > e100


@pytest.mark.parametrize("n", [2, 3, 4])
def test_drift_speed(n):
    assert drift_speed(gaussian_data(n), 10.0) == pytest.approx(n - 1, rel=0.02)


@settings(max_examples=15)
@given(st.floats(0.2, 1.5), st.floats(-2.0, 2.0), st.floats(1.0, 60.0))
def test_mass_conserved(width, center, T):
    z = np.arange(-12.0, 12.0 + 1e-9, 0.05)
    data = HoroField.from_function(z, lambda z: np.exp(-((z - center) / width) ** 2), 3)
    v = exact_drift_solution(data, T)
    assert v.mass() == pytest.approx(data.mass(), rel=1e-8)


def test_sup_decays_like_inverse_root_t():
    peaks = [np.max(exact_drift_solution(gaussian_data(3), t).values) * math.sqrt(t)
             for t in (10.0, 100.0, 1000.0)]
    assert all(p == pytest.approx(1 / math.sqrt(4 * math.pi), rel=0.1) for p in peaks)


def test_pde_residual_second_order():
    data = gaussian_data(3)
    res = []
    for h in (0.1, 0.05):
        z = np.arange(0.0, 20.0 + 1e-9, h)
        res.append(np.max(np.abs(pde_residual(data, 5.0, z))))
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.15)


def test_nonintegrable_data_rejected():
    flat = HoroField.from_function(Z, lambda z: np.ones_like(z), 3)
    with pytest.raises(NonintegrableDataError):
        exact_drift_solution(flat, 1.0)
    with pytest.raises(NonintegrableDataError):
        exact_drift_solution(HoroField.point_mass(Z, 3, mass=math.inf), 1.0)


def test_field_validation():
    with pytest.raises(DomainError):
        HoroField(np.array([0.0, 1.0]), np.zeros(2), 0.0, 3)
    with pytest.raises(DomainError):
        HoroField(Z, np.full(Z.size, np.nan), 0.0, 3)
    with pytest.raises(DomainError):
        exact_drift_solution(gaussian_data(3), 0.0)
    with pytest.raises(DomainError):
        horo_error(gaussian_data(3))
