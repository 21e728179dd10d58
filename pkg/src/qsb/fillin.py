"""Lower bound on the largest normalized total mean curvature of
nonnegative-scalar-curvature fill-ins.

For an (n-1)-manifold with metric of positive scalar curvature the supremum
of (1/((n-1) omega_{n-1})) * integral H over mean-convex NNSC fill-ins obeys

    Lambda >= r^(n-1) * sqrt(min R / ((n-1)(n-2))),

with r the volume radius.  Only the formula is evaluated; no fill-in geometry
is constructed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NegativeCurvature
from .metric import ConformalMetric, gauss_curvature

__all__ = ["FillinBound", "lambda_lower_from_metric", "lambda_lower_general"]


@dataclass(frozen=True)
class FillinBound:
    n: int
    r: float
    min_R: float
    lambda_lower: float


def lambda_lower_general(n: int, r: float, min_R: float) -> FillinBound:
    """Evaluate the bound for dimension n >= 3, volume radius r, min R >= 0."""
    if n < 3:
        raise ConfigurationError(f"dimension must be >= 3, got {n}")
    if not (r > 0.0 and np.isfinite(r)):
        raise ConfigurationError(f"volume radius must be positive, got {r}")
    if min_R < 0.0:
        raise ConfigurationError(f"minimum scalar curvature must be >= 0, got {min_R}")
    value = r ** (n - 1) * np.sqrt(min_R / ((n - 1) * (n - 2)))
    return FillinBound(n=int(n), r=float(r), min_R=float(min_R), lambda_lower=float(value))


def lambda_lower_from_metric(m: ConformalMetric) -> FillinBound:
    """Dimension-3 bound r^2 sqrt(min K) from a sphere metric (R = 2K)."""
    k_min = float(gauss_curvature(m).values.min())
    if k_min < -1e-10:
        raise NegativeCurvature(
            f"minimum Gauss curvature {k_min:.3e} below the admissible range"
        )
    return lambda_lower_general(3, m.r, 2.0 * max(k_min, 0.0))
