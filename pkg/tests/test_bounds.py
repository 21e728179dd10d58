import numpy as np
import pytest
from numpy.testing import assert_allclose

from qsb.bounds import (
    MassBoundReport,
    Reparameterization,
    affine_density_reparameterization,
    bound_general,
    bound_half_r,
    bound_theorem,
    optimize_s,
    piecewise_linear_reparameterization,
    realizing_reparameterization,
    zeta_upper,
)
from qsb.errors import InvalidReparameterization, NonIntegrableZeta
from qsb.grid import ScalarField, build_grid, real_harmonic
from qsb.metric import BoundaryData, make_metric, total_mean_curvature
from qsb.path import PathTable, build_path_table


@pytest.fixture(scope="module")
def grid8():
    return build_grid(8)


@pytest.fixture(scope="module")
def round_metric(grid8):
    return make_metric(ScalarField.constant(grid8, 0.0), 1.0)


@pytest.fixture(scope="module")
def round_table(round_metric):
    return build_path_table(round_metric, n_nodes=33)


@pytest.fixture(scope="module")
def perturbed(grid8):
    m = make_metric(ScalarField(grid8, 0.1 * real_harmonic(grid8, 2, 2).values), 1.0)
    table = build_path_table(m, n_nodes=65)
    bdata = BoundaryData(m, ScalarField.constant(grid8, 2.0))
    return table, bdata


def synthetic_table(metric, t, alphas, betas):
    return PathTable.from_arrays(metric, t, alphas, betas)


def schwarzschild_data(grid, metric, m):
    return BoundaryData(metric, ScalarField.constant(grid, 2.0 * np.sqrt(1.0 - 2.0 * m)))


# ----------------------------------------------------------------------
# zeta
# ----------------------------------------------------------------------


def test_zeta_round_is_zero(round_table):
    assert zeta_upper(round_table) < 1e-10


def test_zeta_polynomial_oracle(round_metric):
    # alpha = t^2, beta = 1: integral of t/2 over [0,1] = 1/4
    t = np.linspace(0.0, 1.0, 2001)
    table = synthetic_table(round_metric, t, t**2, np.ones_like(t))
    assert abs(zeta_upper(table) - 0.25) < 1e-8


def test_zeta_singular_endpoint_oracle(round_metric):
    # alpha = 1, beta = t: integral of 1/(2 sqrt t) = 1 (integrable endpoint)
    t = np.linspace(0.0, 1.0, 2001)
    table = synthetic_table(round_metric, t, np.ones_like(t), t.copy())
    assert abs(zeta_upper(table) - 1.0) < 1e-6


def test_zeta_rejects_interior_nonpositive_beta(round_metric):
    t = np.linspace(0.0, 1.0, 101)
    beta = np.ones_like(t)
    beta[40] = -0.1
    table = synthetic_table(round_metric, t, np.ones_like(t), beta)
    with pytest.raises(NonIntegrableZeta):
        zeta_upper(table)


def test_zeta_node_doubling(grid8):
    m = make_metric(ScalarField(grid8, 0.1 * real_harmonic(grid8, 2, 2).values), 1.0)
    z1 = zeta_upper(build_path_table(m, n_nodes=65))
    z2 = zeta_upper(build_path_table(m, n_nodes=129))
    assert abs(z1 - z2) < 1e-6


# ----------------------------------------------------------------------
# general bound
# ----------------------------------------------------------------------


def test_round_bound_is_rep_independent(grid8, round_metric, round_table):
    bdata = schwarzschild_data(grid8, round_metric, 0.25)
    calH = total_mean_curvature(bdata)
    expected = 0.5 * (1.0 - calH**2)
    rep_a = affine_density_reparameterization(round_table, 0.7, np.array([1.0, 2.0, 0.5]))
    rep_b = piecewise_linear_reparameterization(
        round_table, np.array([0.0, 0.4, 1.0]), np.array([1.0, 1.3, 2.1])
    )
    va = bound_general(round_table, rep_a, bdata)
    vb = bound_general(round_table, rep_b, bdata)
    assert abs(va - vb) < 1e-10
    assert abs(va - expected) < 1e-10


def test_round_schwarzschild_equality(grid8, round_metric, round_table):
    bdata = schwarzschild_data(grid8, round_metric, 0.25)
    rep = affine_density_reparameterization(round_table, 0.5, np.ones(4))
    assert abs(bound_general(round_table, rep, bdata) - 0.25) < 1e-8


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_bound_scaling_covariance(perturbed, c):
    table, bdata = perturbed
    rep = realizing_reparameterization(table, total_mean_curvature(bdata))
    base = bound_general(table, rep, bdata)
    scaled_val = bound_general(table, rep, bdata.scaled(c))
    assert abs(scaled_val - c * base) < 1e-12 * max(1.0, abs(c * base))


def test_affine_small_rate_recovers_half_r(perturbed):
    table, bdata = perturbed
    rep = affine_density_reparameterization(table, 1e-6, np.ones(1))
    assert abs(bound_general(table, rep, bdata) - bound_half_r(bdata)) < 1e-4


def test_invalid_reparameterization_rejected(round_table):
    with pytest.raises(InvalidReparameterization):
        affine_density_reparameterization(round_table, -1.0, np.ones(2))
    with pytest.raises(InvalidReparameterization):
        piecewise_linear_reparameterization(
            round_table, np.array([0.0, 0.5, 1.0]), np.array([1.0, 0.9, 1.5])
        )


# ----------------------------------------------------------------------
# closed form
# ----------------------------------------------------------------------


def test_theorem_round_euclidean(grid8, round_metric, round_table):
    bdata = BoundaryData(round_metric, ScalarField.constant(grid8, 2.0))
    value, _ = bound_theorem(round_table, bdata)
    assert abs(value) < 1e-10


def test_theorem_round_schwarzschild(grid8, round_metric, round_table):
    bdata = schwarzschild_data(grid8, round_metric, 0.25)
    value, _ = bound_theorem(round_table, bdata)
    assert abs(value - 0.25) < 1e-10


def test_theorem_synthetic_cross_check(grid8, round_metric):
    # zeta = 0.1 via constant alpha = 0.04, beta = 1; calH = 1 via H = 2
    t = np.linspace(0.0, 1.0, 2001)
    table = synthetic_table(round_metric, t, np.full_like(t, 0.04), np.ones_like(t))
    bdata = BoundaryData(round_metric, ScalarField.constant(grid8, 2.0))
    value, rep = bound_theorem(table, bdata)
    assert abs(value - 0.105) < 1e-10
    assert rep.family == "ode_sqrt"
    assert abs(bound_general(table, rep, bdata) - value) < 1e-6


def test_theorem_monotone_in_zeta(grid8, round_metric):
    t = np.linspace(0.0, 1.0, 501)
    bdata = BoundaryData(round_metric, ScalarField.constant(grid8, 2.0))
    values = []
    for a in (0.01, 0.04, 0.09):
        table = synthetic_table(round_metric, t, np.full_like(t, a), np.ones_like(t))
        values.append(bound_theorem(table, bdata)[0])
    assert values[0] < values[1] < values[2]


def test_half_r_values(grid8, round_metric):
    bdata = BoundaryData(round_metric, ScalarField.constant(grid8, 2.0))
    assert bound_half_r(bdata) == 0.5
    assert bound_half_r(bdata.scaled(3.0)) == 1.5


def test_bound_general_node_doubling(grid8):
    m = make_metric(ScalarField(grid8, 0.1 * real_harmonic(grid8, 2, 2).values), 1.0)
    bdata = BoundaryData(m, ScalarField.constant(grid8, 2.0))
    values = []
    for n in (65, 129):
        table = build_path_table(m, n_nodes=n)
        rep = realizing_reparameterization(table, total_mean_curvature(bdata))
        values.append(bound_general(table, rep, bdata))
    assert abs(values[0] - values[1]) < 1e-6


# ----------------------------------------------------------------------
# optimizer
# ----------------------------------------------------------------------


@pytest.mark.parametrize("family", ["ode_sqrt", "affine_density", "piecewise_linear"])
def test_optimizer_round_data(grid8, round_metric, round_table, family):
    bdata = schwarzschild_data(grid8, round_metric, 0.25)
    best, rep = optimize_s(round_table, bdata, family=family, budget=60)
    assert abs(best - 0.25) < 1e-9
    assert rep.b > 1.0


def test_optimizer_small_mean_curvature_limit(grid8, round_metric, perturbed):
    table, _ = perturbed
    bdata = BoundaryData(table.metric, ScalarField.constant(grid8, 1e-6))
    best, _ = optimize_s(table, bdata, family="ode_sqrt", budget=60)
    assert abs(best - bound_half_r(bdata)) < 1e-6


def test_optimizer_dominance(perturbed):
    table, bdata = perturbed
    theorem_value, _ = bound_theorem(table, bdata)
    for family in ("ode_sqrt", "affine_density", "piecewise_linear"):
        best, rep = optimize_s(table, bdata, family=family, budget=80)
        assert best <= min(theorem_value, bound_half_r(bdata)) + 1e-10
        assert np.all(rep.s_prime > 0)


def test_optimizer_deterministic(perturbed):
    table, bdata = perturbed
    b1, r1 = optimize_s(table, bdata, family="affine_density", budget=50)
    b2, r2 = optimize_s(table, bdata, family="affine_density", budget=50)
    assert b1 == b2
    assert r1.params == r2.params


# ----------------------------------------------------------------------
# report container
# ----------------------------------------------------------------------


def test_report_invariant():
    with pytest.raises(Exception):
        MassBoundReport(
            r_gamma=1.0, area=4 * np.pi, kappa=1.0, zeta_upper=0.0, calH=1.0,
            bound_theorem=0.0, bound_half_r=0.5, bound_best=0.1,
            best_family="ode_sqrt", best_params={}, extension_mass=None, tolerances={},
        )


def test_reparameterization_inverse_consistency(perturbed):
    table, bdata = perturbed
    rep = realizing_reparameterization(table, total_mean_curvature(bdata))
    s_probe = np.linspace(1.0, rep.b, 57)
    t = rep.t_of_s(s_probe)
    s_back = rep.s_of_t(t)
    assert np.abs(s_back - s_probe).max() < 1e-8
    # t'(s) = 1/s'(t) inside the junction, 0 beyond
    tp = rep.tprime_of_s(np.array([1.0 + 0.5 * (rep.b - 1.0), rep.b + 1.0]))
    assert tp[0] > 0 and tp[1] == 0.0
