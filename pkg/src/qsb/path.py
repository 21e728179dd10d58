"""Constant-area path from a normalized metric to the round metric.

For a normalized conformal factor phi the path of unit-area-radius metrics

    sigma(t) = c(t)^-1 exp(2 (1-t) phi) sigma_o,
    c(t) = (1 / 4 pi) integral exp(2 (1-t) phi) dmu_o,

interpolates from exp(2 phi) sigma_o at t = 0 to sigma_o at t = 1 with area
fixed at 4 pi.  A gauge potential psi_t solving

    laplacian_{sigma_o} psi = exp(2 w) (2 phi + dln c/dt),   w = (1-t) phi - ln(c)/2,

turns the path velocity into the trace-free deformation tensor

    D = sigma'(t) + 2 Hess_{sigma(t)} psi,

whose scaled sup norm and the scaled curvature minimum give the roundness
functionals alpha(t), beta(t).  Everything is evaluated in sigma_o frame
components on the fixed grid; the generating diffeomorphisms are never
integrated (the radial evolution compensates with an advection term built
from d psi).

Numerical notes.  c and its logarithmic derivative use the same quadrature,
so the gauge equation's solvability integral vanishes to roundoff.  The
curvature of sigma(t) is assembled pointwise as
c * exp(-2 (1-t) phi) * [t + (1-t) (1 - laplacian phi)], which makes the
Gauss-Bonnet integral along the whole path exact at the nodes.  The gauge
solve is spectral over the full resolvable band (l <= 3 L), leaving only the
spectral tail of the right-hand side in the reported gauge residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigurationError, GaugeSolveFailed, PathCurvatureViolation
from .grid import CovectorField, ScalarField, SphereGrid, SymTensorField
from .metric import ConformalMetric

__all__ = ["PathSample", "PathTable", "path_sample", "build_path_table", "path_t_nodes"]


@dataclass(frozen=True)
class PathSample:
    """Path data at a single parameter value t.

    ``w`` is the log conformal factor of sigma(t), ``K`` its Gauss curvature,
    ``psi`` the gauge potential with vanishing round mean, ``dpsi`` its
    differential (frame components), ``D`` the trace-free deformation tensor
    in sigma_o frame components, and (alpha, beta) the roundness functionals.
    """

    t: float
    c: float
    c_prime: float
    w: ScalarField
    K: ScalarField
    psi: ScalarField
    dpsi: CovectorField
    D: SymTensorField
    alpha: float
    beta: float
    gauge_residual: float
    solvability_defect: float

    def deformation_norm_squared(self) -> np.ndarray:
        """Pointwise |D|^2 with respect to sigma(t)."""
        return np.exp(-4.0 * self.w.values) * self.D.frame_norm_squared()


class PathTable:
    """Ordered path samples with monotone cubic interpolation of alpha, beta.

    Nodes are clustered near t = 0 (where beta may vanish linearly); t = 0
    and t = 1 are always included.
    """

    interpolation_rule = "pchip"

    def __init__(self, metric: ConformalMetric, samples: list[PathSample]):
        t = np.array([s.t for s in samples])
        self.samples = list(samples)
        self._init_arrays(metric, t, np.array([s.alpha for s in samples]),
                          np.array([s.beta for s in samples]))

    @classmethod
    def from_arrays(cls, metric: ConformalMetric, t_nodes, alphas, betas) -> "PathTable":
        """Table from precomputed (t, alpha, beta) samples; no field data kept."""
        table = cls.__new__(cls)
        table.samples = []
        table._init_arrays(metric, np.asarray(t_nodes, dtype=float),
                           np.asarray(alphas, dtype=float), np.asarray(betas, dtype=float))
        return table

    def _init_arrays(self, metric, t, alphas, betas):
        if t.size < 2 or np.any(np.diff(t) <= 0.0):
            raise ConfigurationError("path nodes must be strictly increasing")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ConfigurationError("path must start at t=0 and end at t=1")
        self.metric = metric
        self.t_nodes = t
        self.alphas = alphas
        self.betas = betas
        if abs(self.betas[-1] - 1.0) > 1e-8:
            raise PathCurvatureViolation(
                f"path endpoint not round: beta(1) = {self.betas[-1]:.12f}"
            )
        self._alpha_interp = PchipInterpolator(t, self.alphas)
        self._beta_interp = PchipInterpolator(t, self.betas)

    @property
    def grid(self) -> SphereGrid:
        return self.metric.grid

    def alpha_of(self, t):
        return np.clip(self._alpha_interp(t), 0.0, None)

    def beta_of(self, t):
        return self._beta_interp(t)

    @property
    def is_round(self) -> bool:
        """True when the path velocity vanishes identically (round input)."""
        return float(self.alphas.max()) < 1e-14


def path_t_nodes(n_nodes: int) -> np.ndarray:
    """Cosine-clustered nodes on [0, 1], dense near t = 0, endpoints included."""
    if n_nodes < 9:
        raise ConfigurationError(f"need at least 9 path nodes, got {n_nodes}")
    j = np.arange(n_nodes)
    t = 1.0 - np.cos(0.5 * np.pi * j / (n_nodes - 1))
    t[0], t[-1] = 0.0, 1.0
    return t


def path_sample(m: ConformalMetric, t: float, gauge_tol: float = 1e-8) -> PathSample:
    """Evaluate the path data at parameter t in [0, 1].

    Raises
    ------
    GaugeSolveFailed
        If the spectral gauge solve leaves a sup-norm residual above
        ``gauge_tol`` in the trace-free condition.
    PathCurvatureViolation
        If min K_{sigma(t)} < -1e-8 for t > 0, which contradicts the
        positivity the construction guarantees for admissible input.
    """
    if not 0.0 <= t <= 1.0:
        raise ConfigurationError(f"path parameter must lie in [0, 1], got {t}")
    grid = m.grid
    phi = m.phi.values
    lap_phi = grid.laplacian_values(phi)

    e_scaled = np.exp(2.0 * (1.0 - t) * phi)
    int_e = grid.integrate_values(e_scaled)
    c = int_e / (4.0 * np.pi)
    c_prime = -grid.integrate_values(2.0 * phi * e_scaled) / int_e
    w = (1.0 - t) * phi - 0.5 * np.log(c)
    e2w = np.exp(2.0 * w)

    # curvature assembled pointwise; (1 - lap phi) = e^{2 phi} r^2 K_gamma
    K = (c / e_scaled) * (t + (1.0 - t) * (1.0 - lap_phi))
    beta = float(K.min())
    if t > 0.0 and beta < -1e-8:
        raise PathCurvatureViolation(
            f"min K_sigma(t) = {beta:.3e} < 0 at t = {t:.6f}; "
            "input curvature or resolution inadmissible"
        )

    source = 2.0 * phi + c_prime
    rhs = e2w * source
    solvability = grid.integrate_values(rhs)
    psi = grid.solve_poisson_values(rhs)
    lap_psi = grid.laplacian_values(psi)
    gauge_residual = float(np.abs(2.0 * np.exp(-2.0 * w) * lap_psi - 2.0 * source).max())
    if gauge_residual > gauge_tol:
        raise GaugeSolveFailed(
            f"gauge residual {gauge_residual:.3e} exceeds tolerance {gauge_tol:.1e} "
            f"at t = {t:.6f}; raise the band limit"
        )

    dpsi_t, dpsi_l = grid.gradient_values(psi)
    h_tt, h_tl, h_ll = grid.hessian_values(psi)
    if t < 1.0:
        # conformal Hessian correction for sigma(t) = e^{2(1-t) phi - ln c} sigma_o
        dphi_t, dphi_l = grid.gradient_values(phi)
        cross = dphi_t * dpsi_t + dphi_l * dpsi_l
        f = 1.0 - t
        h_tt = h_tt - f * (2.0 * dpsi_t * dphi_t - cross)
        h_tl = h_tl - f * (dpsi_t * dphi_l + dpsi_l * dphi_t)
        h_ll = h_ll - f * (2.0 * dpsi_l * dphi_l - cross)

    vel = (-2.0 * phi - c_prime) * e2w  # sigma'(t) frame scalar: vel * identity
    d_tt = vel + 2.0 * h_tt
    d_tl = 2.0 * h_tl
    d_ll = vel + 2.0 * h_ll
    norm2_sigma_t = np.exp(-4.0 * w) * (d_tt**2 + 2.0 * d_tl**2 + d_ll**2)
    alpha = float(norm2_sigma_t.max()) / 8.0

    return PathSample(
        t=float(t),
        c=float(c),
        c_prime=float(c_prime),
        w=ScalarField(grid, w),
        K=ScalarField(grid, K),
        psi=ScalarField(grid, psi),
        dpsi=CovectorField(grid, dpsi_t, dpsi_l),
        D=SymTensorField(grid, d_tt, d_tl, d_ll),
        alpha=alpha,
        beta=beta,
        gauge_residual=gauge_residual,
        solvability_defect=float(solvability),
    )


def build_path_table(m: ConformalMetric, n_nodes: int = 65, gauge_tol: float = 1e-8) -> PathTable:
    """Sample the path at cosine-clustered nodes and assemble the table."""
    t_nodes = path_t_nodes(n_nodes)
    samples = [path_sample(m, t, gauge_tol) for t in t_nodes]
    return PathTable(m, samples)


class PathCoefficientCache:
    """Dense-in-t cache of the radial-evolution coefficient fields.

    Stores w, K, |D/2|^2 and d psi on a fine cosine-clustered t mesh and
    interpolates each nodal value in t with a monotone cubic.  Exact (no
    interpolation error) for round input, where all samples coincide.
    """

    def __init__(self, m: ConformalMetric, n_cache: int = 257, gauge_tol: float = 1e-6):
        grid = m.grid
        t = path_t_nodes(max(n_cache, 9))
        w = np.empty((t.size, grid.n_theta, grid.n_lambda))
        K = np.empty_like(w)
        q = np.empty_like(w)  # |D/2|^2 w.r.t. sigma(t)
        dpt = np.empty_like(w)
        dpl = np.empty_like(w)
        for i, ti in enumerate(t):
            s = path_sample(m, ti, gauge_tol)
            w[i] = s.w.values
            K[i] = s.K.values
            q[i] = 0.25 * s.deformation_norm_squared()
            dpt[i] = s.dpsi.comp_theta
            dpl[i] = s.dpsi.comp_lambda
        self.t = t
        self._interp = {
            name: PchipInterpolator(t, data, axis=0)
            for name, data in (("w", w), ("K", K), ("q", q), ("dpsi_t", dpt), ("dpsi_l", dpl))
        }

    def at(self, t: float) -> dict[str, np.ndarray]:
        tt = min(max(t, 0.0), 1.0)
        return {name: f(tt) for name, f in self._interp.items()}
