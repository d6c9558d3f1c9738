"""Exception hierarchy.

Every error raised for bad input derives from :class:`ContractError`, which the
command line maps to exit code 2. Anything else escaping is an internal fault.
"""


class TlsError(Exception):
    """Base class for all tlsdet errors."""


class ContractError(TlsError, ValueError):
    """Input violates a documented precondition."""


class InvalidSpec(ContractError):
    pass


class OutOfBounds(ContractError):
    pass


class DimMismatch(ContractError):
    pass


class EmptySites(ContractError):
    pass


class NoLabeledSamples(ContractError):
    pass


class UndefinedMetric(ContractError):
    """A ratio metric whose denominator is zero."""


class TooFewSamples(ContractError):
    pass


class ZeroVariance(ContractError):
    pass


class EmptySample(ContractError):
    pass


class GroupTooSmall(ContractError):
    pass


class ZeroArea(ContractError):
    pass


class InfeasiblePacking(ContractError):
    pass


class ParseError(ContractError):
    pass
