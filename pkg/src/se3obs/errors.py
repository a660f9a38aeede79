"""Exception types shared across the package."""

from __future__ import annotations


class Se3ObsError(Exception):
    """Base class for all errors raised by this package."""


class LogSingularity(Se3ObsError, ValueError):
    """Logarithm requested at (or too close to) a rotation by pi."""


class InvalidAlgebraElement(Se3ObsError, ValueError):
    """A 4x4 matrix that is not an element of se(3)."""


class SingularInertia(Se3ObsError, ValueError):
    """Inertia that is not symmetric positive definite."""


class GainBoundViolated(Se3ObsError, ValueError):
    """Observer gain p1 fails the almost-global stability bound.

    Both sides of the inequality are kept on the exception so callers can
    report the margin.
    """

    def __init__(self, p1: float, bound: float) -> None:
        super().__init__(f"p1 = {p1:.6g} does not exceed the lower bound {bound:.6g}")
        self.p1 = p1
        self.bound = bound


class ConfigError(Se3ObsError):
    """Scenario configuration could not be used."""


class ParseError(ConfigError):
    """Configuration text is not valid."""


class ValidationError(ConfigError):
    """Configuration parsed but a field violates the schema."""

    def __init__(self, field: str, reason: str) -> None:
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
