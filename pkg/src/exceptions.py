"""
Error hierarchy. Every error knows the exit status the CLI reports for it.
"""

from typing import Optional


class TreeShiftError(Exception):
    """Base class for all library errors."""

    exit_code = 1

    def __init__(self, message: str, witness: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.witness = witness

    def to_dict(self) -> dict:
        result = {"error": type(self).__name__, "message": self.message}
        if self.witness is not None:
            result["witness"] = self.witness
        return result


class InputError(TreeShiftError):
    """Malformed documents, unresolvable addresses, nonpositive weights."""

    exit_code = 2


class AddressError(InputError):
    pass


class DomainError(TreeShiftError):
    """A theorem's precondition does not hold for the given input."""

    exit_code = 1


class LeafObstructionError(DomainError):
    """A leaf sits where the construction needs descendants."""


class UnboundedOperatorError(DomainError):
    pass


class ShadowingError(DomainError):
    pass


class OracleConvergenceError(DomainError):
    def __init__(self, message: str, last_value: float, gap: float):
        super().__init__(message)
        self.last_value = last_value
        self.gap = gap


class WindowExhaustedError(TreeShiftError):
    """An operation would leave the declared depth window or vertex limit."""

    exit_code = 3
