"""Exception hierarchy for geoswarm.

Numerical failures and input/configuration failures are kept apart so the CLI
can map them onto distinct exit codes.
"""


class GeoswarmError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(GeoswarmError):
    """A computation could not produce a meaningful number."""


class InputError(GeoswarmError, ValueError):
    """Bad user input (arguments, configuration)."""


class NonFiniteState(NumericalError):
    """A geodesic state became NaN or infinite during integration."""


class DegenerateVelocity(NumericalError, ValueError):
    """A velocity is too short (in the metric) to define a direction."""


class TooFewAgents(InputError):
    pass


class ConjugatePointFlag(NumericalError):
    """The separation collapsed; curvature cannot be estimated here."""


class EmptyInput(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class RankDeficient(NumericalError):
    """Snapshot covariance X X^T is numerically singular."""


class DimensionMismatch(InputError):
    pass


class NumericalBreakdown(NumericalError):
    """Sherman-Morrison denominator vanished."""


class ParseError(InputError):
    """Malformed or structurally invalid scenario file."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class ValidationError(InputError):
    """A configuration value violates a constraint."""

    def __init__(self, field, constraint):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")
