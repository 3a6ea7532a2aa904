"""
Exception hierarchy for Honest Forest Lab.
"""

from typing import Optional


class ForestLabError(Exception):
    """Base class for every error raised by the library."""


class ConfigurationError(ForestLabError, ValueError):
    """Invalid tuning parameters, inputs or experiment configuration."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(ForestLabError):
    """Too few usable observations for a fit."""


class SingularMatrixError(ForestLabError):
    """A matrix that must be inverted is singular or badly conditioned."""

    def __init__(self, message: str, condition: float):
        self.condition = condition
        super().__init__(f"{message} (condition number {condition:.3e})")


class EmptyNodeError(ForestLabError):
    """A split rule was asked to split a node without points."""
