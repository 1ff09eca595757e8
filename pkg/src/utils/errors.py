"""Error hierarchy shared by the numerical library and the command line."""

from typing import Any, Optional


class ErrorCategory:
    VALIDATION = "validation"
    NUMERICAL = "numerical"
    GEOMETRY = "geometry"
    INTERNAL = "internal"


class SpectralError(Exception):
    """Base exception carrying a category and optional diagnostic details."""

    category: str = ErrorCategory.NUMERICAL

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None,
                 category: Optional[str] = None):
        self.message = message
        self.details = details or {}
        if category is not None:
            self.category = category
        super().__init__(message)


class InvalidParameter(SpectralError):
    """A precondition on a physical or numerical parameter is violated."""
    category = ErrorCategory.VALIDATION


class DecoupledShell(InvalidParameter):
    """Raised for τ = ±2, where the transmission condition decouples."""

    def __init__(self, tau: float):
        super().__init__(
            f"tau={tau} decouples the shell (MIT bag case); R_tau is undefined",
            details={"tau": tau},
        )


class NoBoundState(SpectralError):
    """The one-dimensional model has no negative eigenvalue for these parameters."""


class RootBracketError(SpectralError):
    """A monotone bracket could not be established before bisection."""


class ConvergenceError(SpectralError):
    """An iterative or dense solver failed to converge."""


class IllConditionedSystem(ConvergenceError):
    pass


class GeometryError(SpectralError):
    category = ErrorCategory.GEOMETRY


class NearSurfaceError(GeometryError):
    pass


class AlignmentError(SpectralError):
    """Multiplicity groups of two spectra could not be paired."""
