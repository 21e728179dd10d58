"""Exception hierarchy.

``ConfigurationError`` maps to CLI exit code 2, every ``SolverError``
subclass to exit code 3.  The class name doubles as the machine-readable
``"error"`` key in JSON reports.
"""


class QsbError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QsbError):
    """Invalid or inconsistent run configuration / input data."""


class SolverError(QsbError):
    """Base class for runtime failures of the numerical pipeline."""

    @property
    def name(self) -> str:
        return type(self).__name__


class SolverDiverged(SolverError):
    """Iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class NonPositiveCurvature(SolverError):
    """Gauss curvature not strictly positive where positivity is required."""


class NegativeCurvature(SolverError):
    """Gauss/scalar curvature below the admissible nonnegative range."""


class GaugeSolveFailed(SolverError):
    """Gauge potential solve left a residual above tolerance."""


class PathCurvatureViolation(SolverError):
    """Curvature along the metric path dropped below the admissible range."""


class NonIntegrableZeta(SolverError):
    """Roundness integrand undefined: nonpositive curvature minimum at an interior node."""


class InvalidReparameterization(SolverError):
    """Reparameterization violates s(0)=1 / s'(t)>0 / b>1."""


class LapseBlowup(SolverError):
    """Lapse lost positivity during the radial evolution."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class StepSizeUnderflow(SolverError):
    """Adaptive step controller could not meet the local error target."""


class InsufficientTail(SolverError):
    """Too few samples in the asymptotic window for mass extraction."""
