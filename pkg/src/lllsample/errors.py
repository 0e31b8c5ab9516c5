"""Exception hierarchy shared by all modules."""


class LLLSampleError(Exception):
    """Base class for every error raised by this package."""


class MalformedConstraint(LLLSampleError, ValueError):
    pass


class DomainTooSmall(LLLSampleError, ValueError):
    pass


class DuplicateViolatingTuple(LLLSampleError, ValueError):
    pass


class IncompleteAssignment(LLLSampleError, ValueError):
    pass


class ParseError(LLLSampleError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyClause(ParseError):
    pass


class VertexOutOfRange(ParseError):
    pass


class ValueOutOfDomain(LLLSampleError, ValueError):
    pass


class SymbolOutOfAlphabet(LLLSampleError, ValueError):
    pass


class PreconditionViolated(LLLSampleError):
    """A constructor precondition does not hold; the message names the inequality."""


class ConstructionFailed(LLLSampleError):
    """Every Moser-Tardos attempt hit its resampling cap."""


class TooLargeToEnumerate(LLLSampleError):
    pass


class InvalidAlphaBeta(LLLSampleError, ValueError):
    pass


class RegimeViolated(LLLSampleError):
    pass


class BudgetExceeded(LLLSampleError):
    pass


class NoSolutions(LLLSampleError):
    pass


class EmptySupport(LLLSampleError):
    pass


class SampleSizeZero(LLLSampleError, ValueError):
    pass
