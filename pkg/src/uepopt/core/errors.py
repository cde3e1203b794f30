"""
Exception hierarchy for uepopt.

Every error raised on purpose by the library derives from UepError,
so callers (and the CLI) can catch one type.
"""

from typing import Any, Optional


class UepError(Exception):
    """Base class for all uepopt errors."""


class DomainError(UepError, ValueError):
    """An argument lies outside the domain of the operation."""


class ProfileFormatError(DomainError):
    """A weight or level file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class InfeasibleError(UepError):
    """No allocation satisfies the constraints.

    Attributes:
        constraint: Label of the binding constraint, e.g. "C3".
    """

    def __init__(self, message: str, constraint: str):
        super().__init__(f"{message} (binding constraint {constraint})")
        self.constraint = constraint


class NumericalError(UepError, ArithmeticError):
    """An iterative solver failed to converge."""

    def __init__(self, message: str, diagnostics: Optional[dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        detail = ", ".join(f"{key}={value}" for key, value in self.diagnostics.items())
        super().__init__(f"{message} [{detail}]" if detail else message)


class ConfigError(UepError):
    """An experiment configuration is invalid.

    Attributes:
        fields: Names of the offending fields.
    """

    def __init__(self, message: str, fields: Optional[list[str]] = None):
        self.fields = list(fields or [])
        super().__init__(message)
