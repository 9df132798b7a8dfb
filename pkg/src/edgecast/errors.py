"""Exception types raised across the package."""


class EdgecastError(Exception):
    """Base class for all package errors."""


class InvalidInputError(EdgecastError, ValueError):
    pass


class InvalidTopologyError(EdgecastError, ValueError):
    pass


class ParseError(EdgecastError, ValueError):
    """Malformed input file; ``line`` is 1-based and includes the header."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoCapacityError(EdgecastError):
    pass


class UnstableQueueError(EdgecastError):
    """Analytic M/M/c formulas requested for lambda >= c * mu."""


class StateCorruptionError(EdgecastError, RuntimeError):
    pass


class InstanceTooLargeError(EdgecastError, ValueError):
    pass


class UndefinedMetricError(EdgecastError, ValueError):
    pass


class ConfigError(EdgecastError, ValueError):
    """Bad scenario/sweep configuration; ``field`` is the dotted path at fault."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
