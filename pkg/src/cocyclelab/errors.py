"""Exception types shared across the package.

Two failure classes are distinguished because the CLI maps them to
different exit codes: bad input (exit 1) versus a computation that was
refused on numerical grounds (exit 2), e.g. a singular factor or a
failed gap check.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Malformed or out-of-contract input (CLI exit code 1)."""


class ConfigError(ValidationError):
    """Config file rejected; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalRefusal(RuntimeError):
    """Computation refused on numerical grounds (CLI exit code 2).

    Raised when an operation's mathematical mechanism is genuinely
    unavailable (singular factor, degenerate top singular value, gap
    condition failure) rather than silently perturbing the input.
    """
