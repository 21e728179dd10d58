"""Quasi-spherical upper bounds for the Bartnik mass of sphere boundary data.

Pipeline: represent the boundary metric conformally, build the constant-area
path to the round metric, evaluate the closed-form and optimized mass bounds,
and cross-check them by integrating the quasi-spherical lapse equation on the
associated asymptotically flat extension and reading off its mass.
"""

from .bounds import (
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
from .extension import (
    ExtensionConfig,
    ExtensionResult,
    ExtensionState,
    MassFit,
    MonotonicityReport,
    evolve,
    extract_mass,
    init_lapse,
    monotonicity_residuals,
    verify_monotonicity,
)
from .fillin import FillinBound, lambda_lower_from_metric, lambda_lower_general
from .grid import (
    CovectorField,
    ScalarField,
    SphereGrid,
    SymTensorField,
    build_grid,
    gradient_round,
    hessian_round,
    integrate,
    laplacian_round,
    real_harmonic,
)
from .metric import (
    BoundaryData,
    ConformalMetric,
    gauss_curvature,
    kappa_ratio,
    make_metric,
    total_mean_curvature,
)
from .path import PathSample, PathTable, build_path_table, path_sample
from .uniformize import UniformizationSolution, center_of_mass, solve_conformal_factor

__version__ = "0.1.0"

__all__ = [
    "MassBoundReport",
    "Reparameterization",
    "affine_density_reparameterization",
    "bound_general",
    "bound_half_r",
    "bound_theorem",
    "optimize_s",
    "piecewise_linear_reparameterization",
    "realizing_reparameterization",
    "zeta_upper",
    "ExtensionConfig",
    "ExtensionResult",
    "ExtensionState",
    "MassFit",
    "MonotonicityReport",
    "evolve",
    "extract_mass",
    "init_lapse",
    "monotonicity_residuals",
    "verify_monotonicity",
    "FillinBound",
    "lambda_lower_from_metric",
    "lambda_lower_general",
    "CovectorField",
    "ScalarField",
    "SphereGrid",
    "SymTensorField",
    "build_grid",
    "gradient_round",
    "hessian_round",
    "integrate",
    "laplacian_round",
    "real_harmonic",
    "BoundaryData",
    "ConformalMetric",
    "gauss_curvature",
    "kappa_ratio",
    "make_metric",
    "total_mean_curvature",
    "PathSample",
    "PathTable",
    "build_path_table",
    "path_sample",
    "UniformizationSolution",
    "center_of_mass",
    "solve_conformal_factor",
]
