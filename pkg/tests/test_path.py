import numpy as np
import pytest
from numpy.testing import assert_allclose

from qsb.errors import GaugeSolveFailed, PathCurvatureViolation
from qsb.grid import ScalarField, build_grid, real_harmonic
from qsb.metric import make_metric
from qsb.path import build_path_table, path_sample, path_t_nodes


@pytest.fixture(scope="module")
def grid8():
    return build_grid(8)


@pytest.fixture(scope="module")
def round_metric(grid8):
    return make_metric(ScalarField.constant(grid8, 0.0), 1.0)


def perturbed_metric(grid, eps, l=2, m=2):
    return make_metric(ScalarField(grid, eps * real_harmonic(grid, l, m).values), 1.0)


def test_round_path_is_constant(grid8, round_metric):
    for t in (0.0, 0.3, 1.0):
        s = path_sample(round_metric, t)
        assert_allclose(s.c, 1.0, atol=1e-14)
        assert np.abs(s.psi.values).max() < 1e-12
        assert np.abs(s.D.frame_norm_squared()).max() < 1e-20
        assert s.alpha < 1e-20
        assert_allclose(s.beta, 1.0, atol=1e-12)


def test_endpoint_is_round(grid8):
    m = perturbed_metric(grid8, 0.15)
    s = path_sample(m, 1.0)
    assert_allclose(s.K.values, 1.0, atol=1e-12)
    assert_allclose(s.beta, 1.0, atol=1e-12)
    assert_allclose(s.c, 1.0, atol=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.2, 0.55, 0.9])
def test_area_constant_along_path(grid8, t):
    m = perturbed_metric(grid8, 0.2)
    s = path_sample(m, t)
    area = grid8.integrate_values(np.exp(2 * s.w.values))
    assert abs(area - 4 * np.pi) < 1e-8


@pytest.mark.parametrize("t", [0.0, 0.35, 0.8])
def test_gauge_solvability_and_residual(grid8, t):
    m = perturbed_metric(grid8, 0.25)
    s = path_sample(m, t, gauge_tol=1e-8)
    assert abs(s.solvability_defect) < 1e-10
    assert s.gauge_residual < 1e-8


def test_gauge_trace_free(grid8):
    # trace of D w.r.t. sigma(t) is bounded by the gauge residual
    m = perturbed_metric(grid8, 0.2)
    s = path_sample(m, 0.3)
    trace = np.exp(-2 * s.w.values) * (s.D.tt + s.D.ll)
    assert np.abs(trace).max() <= s.gauge_residual + 1e-12


def test_gauss_bonnet_along_path(grid8):
    m = perturbed_metric(grid8, 0.25)
    for t in (0.0, 0.4, 1.0):
        s = path_sample(m, t)
        total = grid8.integrate_values(s.K.values * np.exp(2 * s.w.values))
        assert abs(total - 4 * np.pi) < 1e-10


def test_alpha_quadratic_in_perturbation(grid8):
    # leading order D is linear in phi, so alpha scales as eps^2
    for t in (0.0, 0.5):
        a1 = path_sample(perturbed_metric(grid8, 0.01), t).alpha
        a2 = path_sample(perturbed_metric(grid8, 0.02), t).alpha
        assert 3.6 <= a2 / a1 <= 4.4


def test_beta_lower_bound(grid8):
    m = perturbed_metric(grid8, 0.25)
    phi = m.phi.values
    phi_sup = np.abs(phi).max()
    k_minus = max(
        float((np.exp(2 * phi) * (1.0 - m.grid.laplacian_values(phi))).min()), 0.0
    )
    for t in (0.0, 0.2, 0.6, 1.0):
        s = path_sample(m, t)
        lower = np.exp(-4 * (1 - t) * phi_sup) * (
            t + (1 - t) * k_minus * np.exp(-2 * phi_sup)
        )
        assert s.beta >= lower - 1e-8


def test_table_round(grid8, round_metric):
    table = build_path_table(round_metric, n_nodes=17)
    assert np.all(table.alphas < 1e-18)
    assert_allclose(table.betas, 1.0, atol=1e-12)
    assert table.is_round


def test_table_node_layout():
    t = path_t_nodes(33)
    assert t[0] == 0.0 and t[-1] == 1.0
    assert np.all(np.diff(t) > 0)
    # clustering near t = 0
    assert t[1] < (1.0 - t[-2])


def test_table_endpoint_invariants(grid8):
    table = build_path_table(perturbed_metric(grid8, 0.15), n_nodes=17)
    assert abs(table.betas[-1] - 1.0) < 1e-8
    # round input is the only alpha(1)=0 case; generic paths keep a
    # trace-free Hessian residue at t=1
    assert table.alphas[-1] >= 0.0


def test_min_k_zero_input(grid8):
    # tune eps so min K(gamma) = 0 within 1e-6, then beta(0) <= 1e-6 and
    # beta(t) > 0 strictly for t at the first positive node
    y = real_harmonic(grid8, 2, 2).values

    def min_k(eps):
        m = perturbed_metric(grid8, eps)
        return (np.exp(-2 * m.phi.values) * (1 - grid8.laplacian_values(m.phi.values))).min()

    lo, hi = 0.1, 0.8
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if min_k(mid) > 0:
            lo = mid
        else:
            hi = mid
    eps0 = lo
    assert abs(min_k(eps0)) < 1e-6
    table = build_path_table(perturbed_metric(grid8, eps0), n_nodes=33, gauge_tol=1e-5)
    assert table.betas[0] <= 1e-6
    assert np.all(table.betas[1:] > 0)


def test_node_doubling_stability(grid8):
    m = perturbed_metric(grid8, 0.1)
    t_probe = np.linspace(0.0, 1.0, 113)
    coarse = build_path_table(m, n_nodes=65)
    fine = build_path_table(m, n_nodes=129)
    assert np.abs(coarse.alpha_of(t_probe) - fine.alpha_of(t_probe)).max() < 1e-6
    assert np.abs(coarse.beta_of(t_probe) - fine.beta_of(t_probe)).max() < 1e-6


def test_scaling_strips_radius_bitwise(grid8):
    phi = ScalarField(grid8, 0.12 * real_harmonic(grid8, 3, 1).values)
    t_nodes = path_t_nodes(17)
    a = build_path_table(make_metric(phi, 1.0), n_nodes=17)
    b = build_path_table(make_metric(phi, 2.5), n_nodes=17)
    assert np.array_equal(a.alphas, b.alphas)
    assert np.array_equal(a.betas, b.betas)
    assert np.array_equal(t_nodes, a.t_nodes)


def test_gauge_tolerance_enforced(grid8):
    m = perturbed_metric(grid8, 0.3)
    with pytest.raises(GaugeSolveFailed):
        path_sample(m, 0.0, gauge_tol=1e-16)


def test_negative_curvature_detected(grid8):
    # strongly non-convex metric: min K < 0, violated at small positive t
    m = perturbed_metric(grid8, 0.8)
    with pytest.raises(PathCurvatureViolation):
        path_sample(m, 1e-3, gauge_tol=1e-4)
