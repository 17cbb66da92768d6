class StipError(Exception):
    """Base class for all package errors."""


class ZeroLengthPathError(StipError, ValueError):
    pass


class EmptyActionSetError(StipError, ValueError):
    pass


class OutOfBoundsError(StipError, ValueError):
    pass


class DataError(StipError, ValueError):
    pass


class SingularKernelError(StipError, ArithmeticError):
    pass


class PlanningError(StipError, RuntimeError):
    pass


class DimensionError(StipError, ValueError):
    pass


class ConfigError(StipError, ValueError):
    """Raised for an invalid experiment config; ``key`` names the offender."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
