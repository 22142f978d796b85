"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class FccaError(Exception):
    """Base class for all library errors."""

    exit_code = 5


class InvalidArgument(FccaError, ValueError):
    exit_code = 2


class InvalidParameter(InvalidArgument):
    pass


class DegenerateBasis(FccaError):
    pass


class NotSelfAdjoint(FccaError):
    pass


class NotPSD(FccaError):
    pass


class NumericalError(FccaError):
    pass


class SingularShift(NumericalError):
    pass


class DivergentExpansion(NumericalError):
    pass


class ModelInvalid(FccaError):
    exit_code = 2


class StraddleError(FccaError):
    pass


class MultiplicityError(FccaError):
    pass


class AmbiguousSign(FccaError):
    pass


class OutOfRange(FccaError):
    pass


class UndefinedScore(FccaError):
    pass


class InsufficientSample(FccaError):
    exit_code = 3


class DataFormatError(FccaError):
    exit_code = 3


class InvariantFailure(FccaError):
    exit_code = 4
