"""Exception hierarchy for hbs."""
from typing import Optional, Tuple


class HBSError(Exception):
    """Base class for every error raised by hbs."""


class NonFiniteInput(HBSError):
    pass


class DimensionMismatch(HBSError):
    pass


class NotPositiveDefinite(HBSError):
    """A mass matrix or locked inertia tensor failed its Cholesky test."""


class DegenerateGradient(HBSError):
    pass


class OffSurface(HBSError):
    pass


class GrazingImpact(HBSError):
    """The pre-impact state is (numerically) tangent to the guard."""


class InconsistentSamples(HBSError):
    pass


class StepFailure(HBSError):
    pass


class AmbiguousCrossing(HBSError):
    pass


class ShapeProjectionUnavailable(HBSError):
    pass


class UnknownSystem(HBSError):
    pass


class ConfigParseError(HBSError):
    """Malformed config text. Carries the line/column when YAML reports one."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ConfigValidationError(HBSError):
    """Well-formed config that fails validation; `key` is the offending path."""

    def __init__(self, message: str, key: Tuple = ()):
        self.key = tuple(key)
        path = ".".join(str(part) for part in self.key)
        super().__init__(f"{path}: {message}" if path else message)
