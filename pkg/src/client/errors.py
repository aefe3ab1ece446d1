"""
Exceptions raised by the toolkit, each mapped to a command-line exit status.
"""

from typing import Optional


class EDLError(Exception):
    """
    Base class of every error the toolkit raises on purpose.

    :cvar exit_code: The process exit status used by the harness.
    :vartype exit_code: int
    """

    exit_code: int = 1


class ConfigError(EDLError, ValueError):
    """
    Raised when a configuration value or a command-line argument is invalid.
    """

    exit_code = 2


class ShapeError(ConfigError):
    """
    Raised when tensors have incompatible shapes, even kernel sizes or non-finite entries.
    """


class SolverDivergenceError(EDLError, ArithmeticError):
    """
    Raised when a non-finite value shows up while iterating.

    :ivar step: The step (or epoch) at which the value appeared.
    :vartype step: int
    :ivar quantity: The name of the offending quantity.
    :vartype quantity: str
    """

    exit_code = 3

    def __init__(self, step: int, quantity: str, where: Optional[str] = None) -> None:
        self.step = step
        self.quantity = quantity
        self.where = where or "step"
        super().__init__(f"Non-finite {quantity} at {self.where} {step}.")


class InvariantError(EDLError, AssertionError):
    """
    Raised when a verified property does not hold.
    """

    exit_code = 4
