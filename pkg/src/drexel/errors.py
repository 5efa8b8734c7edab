"""Exception hierarchy shared across the package."""


class DrexelError(Exception):
    """Base class for all library errors."""


class DomainError(DrexelError):
    """A state or operation violates its domain contract."""


class CapacityError(DrexelError):
    """An exact-enumeration path was asked for a state space that is too large."""


class NumericError(DrexelError):
    """A computation produced a non-finite value where a finite one is required."""


class UnsupportedModelError(DrexelError):
    """An oracle operation was called on a model class it does not cover."""


class PreconditionError(DrexelError):
    """An operation's stated precondition does not hold for the given inputs."""


class ConfigError(DrexelError):
    """Invalid experiment configuration; carries the offending line when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
