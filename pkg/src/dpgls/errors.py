"""Exception hierarchy.

Validation problems (bad input, bad parameters) derive from ``ValueError`` so
callers can treat them uniformly; numerical breakdowns derive from
``ArithmeticError``. The CLI maps the two families to exit codes 2 and 3.
"""


class DpglsError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DpglsError, ValueError):
    pass


class NumericalError(DpglsError, ArithmeticError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class SingularPrecision(NumericalError):
    """Total posterior precision of the coefficients is singular."""


class InvalidDegreesOfFreedom(ValidationError):
    pass


class MissingColumn(ValidationError):
    pass


class UnbalancedPanel(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class ReplicationError(DpglsError):
    """A simulation replication failed; ``index`` names which one."""

    def __init__(self, index, cause):
        super().__init__(f"replication {index} failed: {cause!r}")
        self.index = index
        self.cause = cause
