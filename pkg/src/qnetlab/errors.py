"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract, so new error conditions
should subclass one of the four roots rather than raising bare ValueError.
"""

from __future__ import annotations


class ConfigError(Exception):
    """Malformed or self-inconsistent experiment configuration."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class DimensionError(DomainError):
    """Vector length mismatch."""


class UnsupportedDimensionError(DomainError):
    """Exact geometry requested for a dimension we do not enumerate."""


class NonCoordinateConvexError(DomainError):
    """Hull has a facet with mixed-sign normal, so no nonnegative
    halfspace description exists."""


class DegenerateError(DomainError):
    """Schedule set or face without the full-dimensional structure an
    operation requires (zero-width region, empty face, ...)."""


class NotInteriorError(DomainError):
    """Arrival-rate vector is not strictly inside the capacity region."""


class UnstableError(DomainError):
    """Requested stationary analysis of an unstable system."""


class TruncationError(DomainError):
    """State-space truncation too small; residual mass reported in args."""


class InvariantViolation(RuntimeError):
    """A pathwise identity that must hold exactly was violated.

    Carries the offending record in ``record`` when available.
    """

    def __init__(self, message: str, record=None):
        super().__init__(message)
        self.record = record


class VerificationError(RuntimeError):
    """A statistical acceptance check failed at the configured confidence."""
