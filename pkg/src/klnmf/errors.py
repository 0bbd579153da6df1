"""Exception hierarchy shared by all modules."""


class KLNMFError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(KLNMFError, ValueError):
    """Operand shapes are incompatible."""


class DomainError(KLNMFError, ValueError):
    """A value left the domain of a function (nonpositive argument, zero divisor...)."""


class ConfigError(KLNMFError, ValueError):
    """Invalid or unsupported solver configuration."""


class DegenerateMetricError(KLNMFError, ValueError):
    """A normalized metric is undefined for the given data."""


class SolverDivergenceError(KLNMFError, RuntimeError):
    """The objective became non-finite during a run.

    The partial trace is available as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ParseError(KLNMFError, ValueError):
    """Malformed input file."""
