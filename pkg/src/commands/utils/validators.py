from typing import Optional, Sequence, Union

import numpy as np

from src.spectral.surface_geometry import SURFACE_BUILDERS
from src.utils.errors import ErrorCategory, SpectralError
from src.utils.logging import setup_logger

logger = setup_logger(__name__)


class ValidationError(SpectralError):
    """Custom exception for command-line input failures."""

    def __init__(self, message: str, category: str = ErrorCategory.VALIDATION):
        super().__init__(message, category=category)


def validate_numeric_parameter(
    value: Union[int, float, None],
    min_value: Optional[float] = None,
    max_value: Optional[float] = None,
    field_name: str = "parameter",
    exclusive: bool = False,
) -> float:
    """
    Validate a numeric parameter within a range.

    Args:
        value: The numeric value to validate
        min_value: Minimum allowed value (None for unbounded)
        max_value: Maximum allowed value (None for unbounded)
        field_name: Name of the parameter for error messages
        exclusive: Whether the bounds themselves are excluded

    Returns:
        The value as a float

    Raises:
        ValidationError: If validation fails
    """
    if value is None:
        raise ValidationError(f"{field_name} is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{field_name} must be a number")
    if not np.isfinite(value):
        raise ValidationError(f"{field_name} must be finite, got {value}")

    if min_value is not None and (value < min_value or (exclusive and value == min_value)):
        relation = "greater than" if exclusive else "at least"
        raise ValidationError(f"{field_name} must be {relation} {min_value}, got {value}")

    if max_value is not None and (value > max_value or (exclusive and value == max_value)):
        relation = "less than" if exclusive else "no more than"
        raise ValidationError(f"{field_name} must be {relation} {max_value}, got {value}")
    return float(value)


def validate_coupling(tau: Optional[float], field_name: str = "tau") -> float:
    """Reject the free case τ = 0 and the decoupled values τ = ±2."""
    tau = validate_numeric_parameter(tau, field_name=field_name)
    if tau == 0.0:
        raise ValidationError(f"{field_name} must be nonzero")
    if abs(tau) == 2.0:
        raise ValidationError(f"{field_name}={tau} decouples the shell and is not supported")
    return tau


def validate_mass_list(values: Optional[Sequence[float]], field_name: str = "m",
                       min_points: int = 1) -> list[float]:
    """Validate a sweep of positive masses; duplicates are rejected."""
    if not values:
        raise ValidationError(f"{field_name} needs at least {min_points} value(s)")
    masses = [validate_numeric_parameter(v, 0.0, None, field_name, exclusive=True) for v in values]
    if len(masses) < min_points:
        raise ValidationError(f"{field_name} needs at least {min_points} values, got {len(masses)}")
    if len(set(masses)) != len(masses):
        raise ValidationError(f"{field_name} contains duplicate values")
    return masses


def validate_surface_name(name: Optional[str]) -> str:
    if not name or name not in SURFACE_BUILDERS:
        raise ValidationError(f"unknown surface '{name}'; expected one of {sorted(SURFACE_BUILDERS)}")
    return name


def validate_interval(interval: Optional[Sequence[float]], m: float) -> Optional[tuple[float, float]]:
    """A λ interval strictly inside the gap (−|m|, |m|), or None for the default."""
    if interval is None:
        return None
    if len(interval) != 2:
        raise ValidationError(f"interval needs two values, got {len(interval)}")
    lo, hi = (float(v) for v in interval)
    if not (-abs(m) < lo < hi < abs(m)):
        raise ValidationError(f"interval ({lo}, {hi}) must satisfy -|m| < lo < hi < |m| with m={m}")
    return lo, hi
