"""Exception hierarchy shared across the package."""

from __future__ import annotations


class EFLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EFLabError, ValueError):
    """Invalid controls, classifier settings or scenario fields."""


class DomainError(EFLabError, ValueError):
    """A function was evaluated (or a grid requested) outside its domain."""


class EvaluationError(EFLabError, ArithmeticError):
    """A right-hand side produced a non-finite value."""

    def __init__(self, t: float, y: float, message: str | None = None):
        self.t = t
        self.y = y
        super().__init__(message or f"non-finite right-hand side at t={t!r}, y={y!r}")


class ResolutionError(EFLabError, ValueError):
    """Too few samples to support the requested analysis."""


class ConstructionError(EFLabError, ValueError):
    """No real solution exists for the requested parameter set."""


class HypothesisViolation(EFLabError, ValueError):
    """Inputs do not satisfy the hypotheses of the checked statement."""
