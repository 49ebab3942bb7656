"""Exception hierarchy."""


class DistillError(Exception):
    """Base class for all package errors."""


class UnknownModeError(DistillError, KeyError):
    """A mode label is not present in the registry."""


class PhotonCollisionError(DistillError, ValueError):
    """Tensor product of states that occupy a common mode."""


class PreconditionError(DistillError, ValueError):
    """An operation's input does not satisfy its documented precondition."""


class NonUnitaryError(DistillError, ValueError):
    pass


class InvalidDensityError(DistillError, ValueError):
    pass


class ParameterError(DistillError, ValueError):
    """Out-of-domain protocol parameter.

    ``name`` is the offending field so the CLI can name the flag.
    """

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name
        self.message = message


class CapacityError(DistillError, ValueError):
    pass


class UndefinedEfficiencyError(DistillError, ZeroDivisionError):
    pass


class InvariantError(DistillError, AssertionError):
    """An internal consistency check failed."""
