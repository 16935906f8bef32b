"""Exception taxonomy shared by all modules.

The CLI maps these onto distinct exit codes, so raising the right class
matters: configuration / input problems (2), capability limits (3),
numerical failures (4).
"""

from __future__ import annotations


class MattisError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MattisError):
    """Invalid input data or configuration (bad path, bad measure, bad config)."""


class CapabilityError(MattisError):
    """Request is well-formed but outside what this implementation supports
    (enumeration budget, jump count, non-realizable interaction monomial)."""


class NonConvergenceError(MattisError):
    """An iterative solver exhausted its budget.

    Carries the iteration trace so callers can diagnose the failure.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class NumericalQualityError(MattisError):
    """A computed quantity violated a quality gate (for example a gradient
    path leaving the monotone PSD cone by more than the tolerated amount)."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ModelWarning(UserWarning):
    """Non-fatal model diagnostics (degenerate inputs kept on purpose)."""
