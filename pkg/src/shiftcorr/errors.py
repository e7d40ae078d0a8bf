"""Exception hierarchy.

The CLI maps these onto exit codes: ``UsageError``/``ValueError`` -> 1,
``InvariantViolation`` (and subclasses) -> 2, ``CapacityError`` -> 3.
"""


class ShiftcorrError(Exception):
    """Base class for all library errors."""

    #: short machine-readable tag used in CLI error lines
    kind = "error"


class UsageError(ShiftcorrError, ValueError):
    """A precondition on the arguments does not hold."""

    kind = "usage"


class CapacityError(ShiftcorrError, MemoryError):
    """The requested size exceeds the configured memory budget."""

    kind = "capacity"


class TableTooShort(UsageError):
    """A coefficient table does not cover the indices an operation needs."""

    kind = "table-too-short"


class InvariantViolation(ShiftcorrError, ArithmeticError):
    """A proven identity or bound failed numerically. Always a bug signal."""

    kind = "invariant"


class BoundViolation(InvariantViolation):
    kind = "bound-violation"


class IdentityViolation(InvariantViolation):
    kind = "identity-violation"


class ModelViolation(InvariantViolation):
    kind = "model-violation"
