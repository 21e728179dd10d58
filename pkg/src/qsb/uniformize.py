"""Prescribed-Gauss-curvature solve for the conformal factor.

Given a strictly positive target curvature field K on the round sphere, find
phi with

    laplacian(phi) + K exp(2 phi) = 1,

so that exp(2 phi) sigma_o has Gauss curvature K.  The solver is a damped
Newton iteration: corrections live in the span of real harmonics up to the
grid's design band limit, the linearized operator

    J = laplacian + 2 K exp(2 phi)

is assembled in that orthonormal basis and inverted by least squares.  Near
the round solution J has an almost-null space on the degree-1 harmonics (the
conformal group of the sphere); the least-squares solve with a small rcond
simply refuses to step along those directions, which is harmless because any
solution of the equation reproduces K pointwise.

A semi-implicit relaxation sweep (spectrally preconditioned residual descent)
is used as a fallback when the Newton line search stalls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SolverDiverged
from .grid import ScalarField, SphereGrid
from .metric import ConformalMetric, make_metric

__all__ = ["UniformizationSolution", "solve_conformal_factor", "center_of_mass"]

# fraction of the user tolerance targeted internally; keeps the integrated
# Gauss-Bonnet defect |int K e^{2 phi} - 4 pi| <= 4 pi * 0.79 * tol < 10 * tol
_SAFETY = 0.79


@dataclass(frozen=True)
class UniformizationSolution:
    """Converged conformal factor with solver diagnostics."""

    phi: ScalarField
    residual_sup: float
    iterations: int
    residual_history: list[float] = field(default_factory=list)

    @property
    def metric(self) -> ConformalMetric:
        """Normalized metric of the solved conformal factor."""
        return make_metric(self.phi)


def _residual(grid: SphereGrid, phi: np.ndarray, K: np.ndarray) -> np.ndarray:
    return grid.laplacian_values(phi) + K * np.exp(2.0 * phi) - 1.0


def _newton_matrix(grid: SphereGrid, basis: np.ndarray, eig: np.ndarray, q: np.ndarray) -> np.ndarray:
    # J = diag(-l(l+1)) + B^T diag(w q) B in the orthonormal real basis
    wq = (grid.weights * q).ravel()
    return np.diag(eig) + basis.T @ (wq[:, None] * basis)


def solve_conformal_factor(
    K: ScalarField,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> UniformizationSolution:
    """Solve laplacian(phi) + K exp(2 phi) = 1 to sup-norm tolerance ``tol``.

    Parameters
    ----------
    K : ScalarField
        Target curvature, strictly positive everywhere.
    tol : float
        Acceptance threshold on the sup norm of the equation residual at the
        grid nodes.  The reachable floor is set by how well a band-limited
        phi can represent the solution.
    max_iter : int
        Combined budget of Newton and fallback iterations.

    Raises
    ------
    ConfigurationError
        If K is not strictly positive or tol is not positive.
    SolverDiverged
        If the residual is still above tol after ``max_iter`` iterations;
        carries the residual history.
    """
    grid = K.grid
    if tol <= 0.0:
        raise ConfigurationError(f"tolerance must be positive, got {tol}")
    k_vals = K.values
    if k_vals.min() <= 0.0:
        raise ConfigurationError(
            f"prescribed curvature must be positive everywhere, min K = {k_vals.min():.6e}"
        )

    basis = grid.real_basis(grid.band_limit)
    degrees = np.concatenate(
        [np.repeat(l, 2 * l + 1) for l in range(grid.band_limit + 1)]
    )
    eig = -(degrees * (degrees + 1.0))

    # exact for constant K
    phi = np.full((grid.n_theta, grid.n_lambda), -0.5 * np.log(grid.mean_values(k_vals)))

    res = _residual(grid, phi, k_vals)
    r_sup = float(np.abs(res).max())
    history = [r_sup]
    target = _SAFETY * tol

    for iteration in range(1, max_iter + 1):
        if r_sup <= target:
            break
        q = 2.0 * k_vals * np.exp(2.0 * phi)
        J = _newton_matrix(grid, basis, eig, q)
        rhs = -(basis.T @ (grid.weights * res).ravel())
        delta_coef, *_ = np.linalg.lstsq(J, rhs, rcond=1e-12)
        delta = (basis @ delta_coef).reshape(phi.shape)

        step = 1.0
        accepted = False
        for _ in range(25):
            trial = phi + step * delta
            trial_res = _residual(grid, trial, k_vals)
            trial_sup = float(np.abs(trial_res).max())
            if trial_sup < r_sup:
                phi, res, r_sup = trial, trial_res, trial_sup
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # spectrally preconditioned relaxation to escape the stall
            q_mean = grid.mean_values(q)
            for _ in range(5):
                coeffs = grid.forward(res)
                denom = q_mean - grid.degrees * (grid.degrees + 1.0)
                denom = np.where(np.abs(denom) < 0.5, np.sign(denom + 1e-30) * 0.5, denom)
                phi = phi - 0.5 * grid.synth(coeffs / denom[:, None])
            res = _residual(grid, phi, k_vals)
            r_sup = float(np.abs(res).max())
        history.append(r_sup)

    if r_sup > target and r_sup > tol:
        raise SolverDiverged(
            f"uniformization stalled at residual {r_sup:.3e} (tol {tol:.1e}) "
            f"after {len(history) - 1} iterations",
            residual_history=history,
        )
    return UniformizationSolution(
        phi=ScalarField(grid, phi),
        residual_sup=r_sup,
        iterations=len(history) - 1,
        residual_history=history,
    )


def center_of_mass(phi: ScalarField) -> np.ndarray:
    """Conformal balancing diagnostic (1/4 pi) * integral x_i exp(2 phi) dmu_o.

    Vanishes for balanced representatives; computed for reporting only, the
    conformal gauge is never fixed.
    """
    grid = phi.grid
    e2 = np.exp(2.0 * phi.values)
    sin_t = np.sin(grid.theta_mesh)
    x = (
        sin_t * np.cos(grid.lambda_mesh),
        sin_t * np.sin(grid.lambda_mesh),
        np.cos(grid.theta_mesh),
    )
    return np.array([grid.integrate_values(xi * e2) for xi in x]) / (4.0 * np.pi)
