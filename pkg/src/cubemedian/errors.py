class CubemedianError(Exception):
    """Base class for package errors."""


class InputError(CubemedianError):
    """Malformed input (bad JSON, dangling edge endpoint, ...). CLI exit 2."""


class InvariantViolation(CubemedianError):
    """A verified structural invariant failed. CLI exit 3."""


class PreconditionError(CubemedianError):
    """An operation was called outside its contract. CLI exit 4."""


class UnsupportedHost(PreconditionError):
    """Input is valid but outside the desk-scale model this package covers."""
