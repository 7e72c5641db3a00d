"""Exception hierarchy.

Everything raised on purpose derives from :class:`OptStopError`.  The CLI maps
:class:`ConfigError` to exit code 2 and :class:`DataError` to exit code 3.
"""


class OptStopError(Exception):
    pass


class ConfigError(OptStopError, ValueError):
    pass


class DataError(OptStopError, ValueError):
    pass


# configuration / parameter errors
class InvalidCost(ConfigError):
    pass


class InvalidSize(ConfigError):
    pass


# data errors
class EmptySample(DataError):
    pass


class NonFinite(DataError):
    pass


class InsufficientTail(DataError):
    pass


class DegenerateTail(DataError):
    pass


class OutOfSupport(DataError):
    pass


class InsufficientData(DataError):
    pass


class ZeroVariance(DataError):
    pass


class NegativeCount(DataError):
    pass


class NoTailMass(DataError):
    pass


class UnreachableTarget(DataError):
    pass


class DomainError(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class InvalidSpin(DataError):
    pass


class TooLarge(DataError):
    pass


class EmptyCandidates(DataError):
    pass


class EmptyRange(DataError):
    pass


class InsufficientPoints(DataError):
    pass


class NonPositiveValue(DataError):
    pass


class SolverFailure(DataError):
    """A numerical root search did not converge or had no bracket."""


class SessionClosed(OptStopError):
    pass


class MaxIterations(OptStopError):
    pass
