import numpy as np
import pytest
from numpy.testing import assert_allclose

from qsb.errors import ConfigurationError, NonPositiveCurvature
from qsb.grid import ScalarField, build_grid, integrate, real_harmonic
from qsb.metric import (
    BoundaryData,
    gauss_curvature,
    kappa_ratio,
    make_metric,
    total_mean_curvature,
)


@pytest.fixture(scope="module")
def grid8():
    return build_grid(8)


def test_make_metric_round_identity(grid8):
    m = make_metric(ScalarField.constant(grid8, 0.0), 1.0)
    assert m.r == 1.0
    assert np.abs(m.phi.values).max() == 0.0


def test_make_metric_constant_shift_absorbed(grid8):
    c = 0.37
    m = make_metric(ScalarField.constant(grid8, c), 1.0)
    assert np.abs(m.phi.values).max() < 1e-13
    assert_allclose(m.r, np.exp(c), rtol=1e-13)


def test_make_metric_preserves_area(grid8):
    phi_raw = ScalarField(grid8, 0.1 * np.cos(grid8.theta_mesh))
    r_raw = 2.0
    raw_area = r_raw**2 * grid8.integrate_values(np.exp(2 * phi_raw.values))
    m = make_metric(phi_raw, r_raw)
    assert_allclose(m.area, raw_area, rtol=1e-10)


def test_normalization_idempotent_bitwise(grid8):
    phi_raw = ScalarField(grid8, 0.2 * real_harmonic(grid8, 2, 2).values)
    m1 = make_metric(phi_raw, 1.5)
    m2 = make_metric(m1.phi, m1.r)
    assert np.array_equal(m1.phi.values, m2.phi.values)
    assert m1.r == m2.r


def test_gauss_curvature_round(grid8):
    m = make_metric(ScalarField.constant(grid8, 0.0), 1.0)
    assert_allclose(gauss_curvature(m).values, 1.0, atol=1e-10)
    m2 = make_metric(ScalarField.constant(grid8, 0.0), 3.0)
    assert_allclose(gauss_curvature(m2).values, 1.0 / 9.0, atol=1e-11)


def test_gauss_bonnet(grid8):
    phi_raw = ScalarField(
        grid8,
        0.15 * real_harmonic(grid8, 2, 2).values + 0.1 * real_harmonic(grid8, 3, 1).values,
    )
    m = make_metric(phi_raw, 1.7)
    k = gauss_curvature(m)
    measure = m.r**2 * np.exp(2 * m.phi.values)
    total = grid8.integrate_values(k.values * measure)
    assert abs(total - 4 * np.pi) < 1e-8


def test_kappa_round_is_one(grid8):
    m = make_metric(ScalarField.constant(grid8, 0.0), 1.0)
    assert kappa_ratio(m) == 1.0


def test_kappa_perturbative_oracle(grid8):
    # first-order: K(eps) = 1 + 4 eps Y22 + O(eps^2) since lap(Y22) = -6 Y22,
    # so kappa ~ (1 + 4 eps max Y22) / (1 + 4 eps min Y22)
    y = real_harmonic(grid8, 2, 2).values
    eps = 0.01
    m = make_metric(ScalarField(grid8, eps * y), 1.0)
    kappa = kappa_ratio(m)
    kappa_lin = (1 + 4 * eps * y.max()) / (1 + 4 * eps * y.min())
    assert abs(kappa - kappa_lin) < 50 * eps**2
    assert kappa > 1.0


def test_kappa_rejects_nonpositive_curvature(grid8):
    # large perturbation drives min K negative
    y = real_harmonic(grid8, 2, 2).values
    m = make_metric(ScalarField(grid8, 0.8 * y), 1.0)
    assert gauss_curvature(m).values.min() <= 0
    with pytest.raises(NonPositiveCurvature):
        kappa_ratio(m)


def test_total_mean_curvature_round(grid8):
    m = make_metric(ScalarField.constant(grid8, 0.0), 1.0)
    b = BoundaryData(m, ScalarField.constant(grid8, 2.0))
    assert_allclose(total_mean_curvature(b), 1.0, rtol=1e-13)


def test_total_mean_curvature_schwarzschild(grid8):
    # H = 2 sqrt(1 - 2m), m = 0.25: calH = sqrt(0.5) by the constant integral
    m = make_metric(ScalarField.constant(grid8, 0.0), 1.0)
    H = ScalarField.constant(grid8, 2 * np.sqrt(0.5))
    b = BoundaryData(m, H)
    assert_allclose(total_mean_curvature(b), np.sqrt(0.5), rtol=1e-13)


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_scaling_invariance(grid8, c):
    phi_raw = ScalarField(grid8, 0.1 * real_harmonic(grid8, 2, 1).values)
    m = make_metric(phi_raw, 1.0)
    b = BoundaryData(m, ScalarField(grid8, 2.0 + 0.3 * np.cos(grid8.theta_mesh)))
    scaled = b.scaled(c)
    assert abs(total_mean_curvature(scaled) - total_mean_curvature(b)) < 1e-12
    assert abs(kappa_ratio(scaled.metric) - kappa_ratio(m)) < 1e-12


def test_boundary_data_requires_positive_h(grid8):
    m = make_metric(ScalarField.constant(grid8, 0.0), 1.0)
    with pytest.raises(ConfigurationError):
        BoundaryData(m, ScalarField(grid8, np.cos(grid8.theta_mesh)))


def test_area_radius_positive_required(grid8):
    with pytest.raises(ConfigurationError):
        make_metric(ScalarField.constant(grid8, 0.0), -1.0)
