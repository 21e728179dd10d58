import numpy as np
import pytest
from numpy.testing import assert_allclose

from qsb.errors import ConfigurationError
from qsb.grid import ScalarField, build_grid, real_harmonic
from qsb.metric import gauss_curvature, make_metric
from qsb.uniformize import center_of_mass, solve_conformal_factor


@pytest.fixture(scope="module")
def grid8():
    return build_grid(8)


def test_constant_curvature_one_gives_round(grid8):
    sol = solve_conformal_factor(ScalarField.constant(grid8, 1.0), tol=1e-10)
    assert sol.residual_sup < 1e-10
    assert np.abs(sol.phi.values).max() < 1e-10
    m = sol.metric
    assert abs(m.r - 1.0) < 1e-12


def test_constant_curvature_four_scaling(grid8):
    # K = 4: phi = -0.5*ln 4 pre-normalization; normalized output (0, r=1/2)
    sol = solve_conformal_factor(ScalarField.constant(grid8, 4.0), tol=1e-10)
    assert_allclose(sol.phi.values, -0.5 * np.log(4.0), atol=1e-10)
    m = sol.metric
    assert np.abs(m.phi.values).max() < 1e-12
    assert_allclose(m.r, 0.5, rtol=1e-12)


def test_round_trip_recovers_curvature(grid8):
    phi_true = ScalarField(grid8, 0.2 * real_harmonic(grid8, 2, 1).values)
    m_true = make_metric(phi_true)
    k_true = gauss_curvature(m_true)
    assert k_true.values.min() > 0
    tol = 1e-10
    sol = solve_conformal_factor(k_true, tol=tol)
    assert sol.residual_sup <= tol
    # make_metric re-attaches the area radius, so curvatures compare directly
    k_solved = gauss_curvature(make_metric(sol.phi))
    assert np.abs(k_solved.values - k_true.values).max() < 10 * tol


def test_residual_monotone_after_damping(grid8):
    phi_true = ScalarField(
        grid8,
        0.25 * real_harmonic(grid8, 2, 2).values + 0.1 * real_harmonic(grid8, 3, 0).values,
    )
    k = gauss_curvature(make_metric(phi_true))
    sol = solve_conformal_factor(k, tol=1e-9)
    hist = np.array(sol.residual_history)
    assert np.all(np.diff(hist) <= 0.0)


def test_integrated_gauss_bonnet_consistency(grid8):
    phi_true = ScalarField(grid8, 0.15 * real_harmonic(grid8, 3, 2).values)
    k = gauss_curvature(make_metric(phi_true))
    tol = 1e-9
    sol = solve_conformal_factor(k, tol=tol)
    total = grid8.integrate_values(k.values * np.exp(2 * sol.phi.values))
    assert abs(total - 4 * np.pi) < 10 * tol


def test_rejects_nonpositive_curvature(grid8):
    k = ScalarField(grid8, 1.0 + 1.5 * np.cos(grid8.theta_mesh))
    with pytest.raises(ConfigurationError):
        solve_conformal_factor(k, tol=1e-8)


def test_rejects_bad_tolerance(grid8):
    with pytest.raises(ConfigurationError):
        solve_conformal_factor(ScalarField.constant(grid8, 1.0), tol=0.0)


def test_center_of_mass_round(grid8):
    com = center_of_mass(ScalarField.constant(grid8, 0.0))
    assert np.abs(com).max() < 1e-13


def test_center_of_mass_parity(grid8):
    # phi even under x3 -> -x3 (built from cos^2) has vanishing third moment
    phi = ScalarField(grid8, 0.3 * np.cos(grid8.theta_mesh) ** 2)
    com = center_of_mass(phi)
    assert abs(com[2]) < 1e-12


def test_center_of_mass_axisymmetric_oracle(grid8):
    # independent 1D Gauss-Legendre reduction of (1/4pi) int x3 e^{2 phi} dmu
    # for phi = 0.1 cos(theta):  0.5 * int_{-1}^{1} x e^{0.2 x} dx
    from scipy.special import roots_legendre

    nodes, w = roots_legendre(64)
    oracle = 0.5 * np.sum(w * nodes * np.exp(0.2 * nodes))
    phi = ScalarField(grid8, 0.1 * np.cos(grid8.theta_mesh))
    com = center_of_mass(phi)
    assert_allclose(com[2], oracle, atol=1e-13)
    assert np.abs(com[:2]).max() < 1e-13
