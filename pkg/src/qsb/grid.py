"""Spectral discretization of the unit round sphere.

The grid couples Gauss-Legendre colatitude nodes with an equispaced,
FFT-ready longitude circle:

    colatitude : theta_j = arccos(mu_j), mu_j the N roots of P_N (no poles)
    longitude  : lambda_k = 2*pi*k/M, k = 0..M-1

For a design band limit L the grid is sized N = 3L+1, M = 2*(3L)+1, so every
spherical harmonic of degree l <= 3L is resolved and the quadrature

    integral f dmu_o  ~=  sum_j sum_k glw_j * (2*pi/M) * f(theta_j, lambda_k)

is exact for products Y_{l,m} * Y_{l',m'} with l + l' <= 6L.  In particular a
pointwise product of up to three band-limit-L fields transforms alias-free, a
deliberately stricter variant of the classical 2/3 dealiasing rule (the
pipeline repeatedly multiplies fields by conformal factors exp(2*phi), whose
spectral tails must stay far below the gauge and Gauss-Bonnet tolerances).

Transforms use orthonormal associated Legendre functions evaluated by the
standard stable recurrence, combined with a real FFT in longitude.  Fields
are real, so only wavenumbers m >= 0 are carried: coefficient arrays have
shape (3L+1, 3L+1) indexed by [degree l, order m] with the m < 0 content
implied by conjugation inside the inverse real FFT.  Degree alone fixes
operator symbols, so the Laplacian, gradient and Hessian below are exact on
resolved harmonics.

Reductions (quadrature sums) run in fixed node order via numpy's pairwise
summation, so identical inputs give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from .errors import ConfigurationError

__all__ = [
    "SphereGrid",
    "ScalarField",
    "CovectorField",
    "SymTensorField",
    "build_grid",
    "integrate",
    "laplacian_round",
    "gradient_round",
    "hessian_round",
    "real_harmonic",
]


def _alp_tables(lgrid: int, mu: np.ndarray, sin_theta: np.ndarray):
    """Orthonormal associated Legendre values and theta-derivatives.

    Returns (P, dP) of shape (lgrid+1, lgrid+1, n_theta) indexed [m, l, j]
    with P[m, l] = 0 for l < m.  Normalization: P[m, l] * exp(i*m*lambda) is
    an orthonormal spherical harmonic (Condon-Shortley phase included, same
    convention as scipy's sph_harm).
    """
    nth = mu.size
    P = np.zeros((lgrid + 1, lgrid + 1, nth))
    P[0, 0] = np.sqrt(1.0 / (4.0 * np.pi))
    for m in range(1, lgrid + 1):
        P[m, m] = -np.sqrt((2 * m + 1) / (2.0 * m)) * sin_theta * P[m - 1, m - 1]
    for m in range(lgrid + 1):
        if m + 1 <= lgrid:
            P[m, m + 1] = np.sqrt(2 * m + 3.0) * mu * P[m, m]
        for l in range(m + 2, lgrid + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[m, l] = a * (mu * P[m, l - 1] - b * P[m, l - 2])
    dP = np.zeros_like(P)
    for m in range(lgrid + 1):
        for l in range(m, lgrid + 1):
            lower = P[m, l - 1] if l - 1 >= m else 0.0
            c = np.sqrt((l * l - m * m) * (2 * l + 1.0) / (2 * l - 1.0)) if l >= 1 else 0.0
            dP[m, l] = (l * mu * P[m, l] - c * lower) / sin_theta
    return P, dP


class SphereGrid:
    """Immutable Gauss-Legendre x Fourier grid with transform plans.

    Parameters
    ----------
    band_limit : int
        Design band limit L >= 4.  Fields intended for pointwise products
        should be band-limited to L; the grid itself resolves degree 3L.

    Attributes
    ----------
    band_limit, lgrid : int
        Design band limit L and grid resolution 3L.
    n_theta, n_lambda : int
        Node counts, 3L+1 and 2*(3L)+1.
    theta, lam : ndarray
        Colatitude and longitude node coordinates.
    weights : ndarray, shape (n_theta, n_lambda)
        Quadrature weights realizing the round area measure (sum = 4*pi).
    """

    def __init__(self, band_limit: int):
        if band_limit < 4:
            raise ConfigurationError(f"band limit must be >= 4, got {band_limit}")
        L = int(band_limit)
        self.band_limit = L
        self.lgrid = 3 * L
        self.n_theta = self.lgrid + 1
        self.n_lambda = 2 * self.lgrid + 1

        mu, glw = roots_legendre(self.n_theta)
        # north-to-south node order; Legendre roots exclude the poles
        self.mu = mu[::-1].copy()
        self.gl_weights = glw[::-1].copy()
        self.theta = np.arccos(self.mu)
        self.lam = np.linspace(0.0, 2.0 * np.pi, self.n_lambda, endpoint=False)
        self.sin_theta = np.sin(self.theta)
        self.cos_theta = self.mu
        self.weights = np.outer(self.gl_weights, np.full(self.n_lambda, 2.0 * np.pi / self.n_lambda))

        # orders m = 0..lgrid, matching the real-FFT frequency count for odd M
        self.orders = np.arange(self.lgrid + 1)
        self.degrees = np.arange(self.lgrid + 1)
        self.laplacian_eigenvalues = -(self.degrees * (self.degrees + 1.0))

        # ALP tables, shape (m, l, j) for m >= 0
        self._P, self._dP = _alp_tables(self.lgrid, self.mu, self.sin_theta)

        th, lm = np.meshgrid(self.theta, self.lam, indexing="ij")
        self.theta_mesh = th
        self.lambda_mesh = lm
        self._real_basis_cache: dict[int, np.ndarray] = {}

    # ------------------------------------------------------------------
    # transforms
    # ------------------------------------------------------------------

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Analysis: real grid values (n_theta, n_lambda) -> coefficients (l, m)."""
        U = np.fft.rfft(values, axis=1) * (2.0 * np.pi / self.n_lambda)
        wU = self.gl_weights[:, None] * U
        return np.einsum("mlj,jm->lm", self._P, wU)

    def synth(self, coeffs: np.ndarray) -> np.ndarray:
        """Synthesis back to real grid values (m < 0 content implied by conjugation)."""
        U = np.einsum("mlj,lm->jm", self._P, coeffs)
        return np.fft.irfft(U, n=self.n_lambda, axis=1) * self.n_lambda

    def synth_dtheta(self, coeffs: np.ndarray) -> np.ndarray:
        """Synthesis of the colatitude derivative of the represented field."""
        U = np.einsum("mlj,lm->jm", self._dP, coeffs)
        return np.fft.irfft(U, n=self.n_lambda, axis=1) * self.n_lambda

    def integrate_values(self, values: np.ndarray) -> float:
        """Quadrature sum against the round measure, fixed reduction order."""
        return float(np.sum(self.weights * values))

    def mean_values(self, values: np.ndarray) -> float:
        return self.integrate_values(values) / (4.0 * np.pi)

    # ------------------------------------------------------------------
    # operators on raw value arrays (field wrappers below)
    # ------------------------------------------------------------------

    def laplacian_values(self, values: np.ndarray) -> np.ndarray:
        a = self.forward(values)
        return self.synth(self.laplacian_eigenvalues[:, None] * a)

    def solve_poisson_values(self, rhs: np.ndarray) -> np.ndarray:
        """Solve laplacian(psi) = rhs with mean-zero psi (l=0 mode dropped).

        The l = 0 component of ``rhs`` is discarded; callers verify
        solvability (vanishing mean) separately when it matters.
        """
        a = self.forward(rhs)
        inv = np.zeros(self.lgrid + 1)
        inv[1:] = 1.0 / self.laplacian_eigenvalues[1:]
        a = inv[:, None] * a
        a[0, :] = 0.0
        return self.synth(a)

    def gradient_values(self, values: np.ndarray):
        """Orthonormal-frame components (e_theta, e_lambda) of the differential."""
        a = self.forward(values)
        d_theta = self.synth_dtheta(a)
        d_lambda = self.synth((1j * self.orders)[None, :] * a) / self.sin_theta[:, None]
        return d_theta, d_lambda

    def hessian_values(self, values: np.ndarray):
        """Frame components (tt, tl, ll) of the covariant Hessian of sigma_o.

        Computed from spectral first derivatives plus the Christoffel terms of
        the round metric; the tt component is recovered from the trace
        identity tt + ll = laplacian, which therefore holds to roundoff.
        """
        a = self.forward(values)
        lap = self.synth(self.laplacian_eigenvalues[:, None] * a)
        im_a = (1j * self.orders)[None, :] * a
        d_theta = self.synth_dtheta(a)
        d_lam = self.synth(im_a)
        s = self.sin_theta[:, None]
        c = self.cos_theta[:, None]
        h_tl = self.synth_dtheta(im_a) / s - (c / s**2) * d_lam
        h_ll = self.synth(-(self.orders**2)[None, :] * a.astype(complex)) / s**2 + (c / s) * d_theta
        h_tt = lap - h_ll
        return h_tt, h_tl, h_ll

    # ------------------------------------------------------------------
    # real orthonormal subspace basis (used by the uniformization solver)
    # ------------------------------------------------------------------

    def real_basis(self, lmax: int) -> np.ndarray:
        """Matrix (n_nodes, (lmax+1)^2) of real orthonormal harmonics.

        Columns are ordered (l, m=0), (l, m, cos), (l, m, sin); orthonormal
        under the grid quadrature for lmax <= lgrid.
        """
        if lmax > self.lgrid:
            raise ConfigurationError(f"lmax {lmax} exceeds grid resolution {self.lgrid}")
        if lmax not in self._real_basis_cache:
            cols = []
            for l in range(lmax + 1):
                coeffs = np.zeros((self.lgrid + 1, self.lgrid + 1), dtype=complex)
                coeffs[l, 0] = 1.0
                cols.append(self.synth(coeffs))
                for m in range(1, l + 1):
                    coeffs[:] = 0.0
                    coeffs[l, m] = 1.0 / np.sqrt(2.0)
                    cols.append(self.synth(coeffs))
                    coeffs[:] = 0.0
                    coeffs[l, m] = -1j / np.sqrt(2.0)
                    cols.append(self.synth(coeffs))
            self._real_basis_cache[lmax] = np.stack([c.ravel() for c in cols], axis=1)
        return self._real_basis_cache[lmax]

    # ------------------------------------------------------------------

    def __repr__(self) -> str:  # pragma: no cover
        return f"SphereGrid(band_limit={self.band_limit}, nodes={self.n_theta}x{self.n_lambda})"


# ----------------------------------------------------------------------
# field containers
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """Grid-sampled real function, values shaped (n_theta, n_lambda)."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        expected = (self.grid.n_theta, self.grid.n_lambda)
        if v.shape != expected:
            raise ConfigurationError(f"field shape {v.shape} != grid shape {expected}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("field contains non-finite values")

    @classmethod
    def constant(cls, grid: SphereGrid, value: float) -> "ScalarField":
        return cls(grid, np.full((grid.n_theta, grid.n_lambda), float(value)))


@dataclass(frozen=True)
class CovectorField:
    """Covector in the orthonormal frame (e_theta, e_lambda) of sigma_o."""

    grid: SphereGrid
    comp_theta: np.ndarray
    comp_lambda: np.ndarray

    def __post_init__(self):
        for name in ("comp_theta", "comp_lambda"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
            if v.shape != (self.grid.n_theta, self.grid.n_lambda):
                raise ConfigurationError(f"{name} has wrong shape {v.shape}")
            if not np.all(np.isfinite(v)):
                raise ConfigurationError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class SymTensorField:
    """Symmetric 2-tensor in the sigma_o orthonormal frame (tt, tl, ll stored)."""

    grid: SphereGrid
    tt: np.ndarray
    tl: np.ndarray
    ll: np.ndarray

    def __post_init__(self):
        for name in ("tt", "tl", "ll"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
            if v.shape != (self.grid.n_theta, self.grid.n_lambda):
                raise ConfigurationError(f"{name} has wrong shape {v.shape}")
            if not np.all(np.isfinite(v)):
                raise ConfigurationError(f"{name} contains non-finite values")

    def frame_norm_squared(self) -> np.ndarray:
        """Pointwise |T|^2 with respect to sigma_o (frame-component sum)."""
        return self.tt**2 + 2.0 * self.tl**2 + self.ll**2


# ----------------------------------------------------------------------
# public operations
# ----------------------------------------------------------------------


def build_grid(band_limit: int) -> SphereGrid:
    """Construct the quadrature/transform grid for a given band limit."""
    return SphereGrid(band_limit)


def integrate(f: ScalarField) -> float:
    """Integral of f against the round measure dmu_o."""
    return f.grid.integrate_values(f.values)


def laplacian_round(f: ScalarField) -> ScalarField:
    """Laplace-Beltrami operator of sigma_o, spectral (-l(l+1) symbol)."""
    return ScalarField(f.grid, f.grid.laplacian_values(f.values))


def gradient_round(f: ScalarField) -> CovectorField:
    """Differential of f in frame components."""
    d_theta, d_lambda = f.grid.gradient_values(f.values)
    return CovectorField(f.grid, d_theta, d_lambda)


def hessian_round(f: ScalarField) -> SymTensorField:
    """Covariant Hessian of f with respect to sigma_o in frame components."""
    h_tt, h_tl, h_ll = f.grid.hessian_values(f.values)
    return SymTensorField(f.grid, h_tt, h_tl, h_ll)


def real_harmonic(grid: SphereGrid, l: int, m: int, part: str = "re") -> ScalarField:
    """Real/imaginary part of the orthonormal spherical harmonic Y_{l,m}.

    Requires 0 <= m <= l <= lgrid; ``part`` is "re" or "im".  The m = 0
    harmonic has no imaginary part.
    """
    if not (0 <= m <= l <= grid.lgrid):
        raise ConfigurationError(f"harmonic (l={l}, m={m}) outside grid range")
    if part not in ("re", "im"):
        raise ConfigurationError(f"part must be 're' or 'im', got {part!r}")
    if part == "im" and m == 0:
        raise ConfigurationError("Y_{l,0} has no imaginary part")
    radial = grid._P[m][l][:, None]
    phase = np.exp(1j * m * grid.lambda_mesh)
    vals = (radial * phase).real if part == "re" else (radial * phase).imag
    return ScalarField(grid, vals)
