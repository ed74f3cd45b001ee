"""Exception hierarchy shared by every numerical module and the CLI."""

from __future__ import annotations


class NonlocalError(Exception):
    """Base class for all errors raised by par_nonlocal_pucci."""


class DomainError(NonlocalError, ValueError):
    """Raised when an input lies outside the domain of an operation."""


class InfeasibleClassError(DomainError):
    """Raised when the constrained ellipticity class has no member."""


class QuadratureAccuracyError(NonlocalError):
    """Raised when the certified error bound cannot be pushed below tol.

    The best value reached and its bound are kept so callers that only want a
    flagged row (the counterexample report) can still record them.
    """

    def __init__(self, message: str, value: object = None, err_bound: float = float("inf")):
        super().__init__(message)
        self.value = value
        self.err_bound = err_bound


class ResolutionError(NonlocalError):
    """Raised when an inf-convolution minimizer lands on the search boundary."""


class ConfigError(NonlocalError, ValueError):
    """Raised for invalid run configurations or command-line usage."""
