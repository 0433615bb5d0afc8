"""Exception hierarchy shared by every module."""


class WeylWalkError(Exception):
    """Base class for all package errors."""


class SpecError(WeylWalkError, ValueError):
    """A group specification is malformed."""


class NonInvolutionGenerator(SpecError):
    pass


class WeylClosureOverflow(SpecError):
    pass


class EmbeddingCollision(SpecError):
    pass


class KeyRangeError(WeylWalkError, OverflowError):
    """Translation coordinates too large for the packed integer keys."""


class LazinessOutOfRange(WeylWalkError, ValueError):
    pass


class RhoOutOfRange(WeylWalkError, ValueError):
    pass


class GroupMismatch(WeylWalkError, ValueError):
    pass


class SupportOverflow(WeylWalkError, MemoryError):
    pass


class NotIrreducible(WeylWalkError, ValueError):
    pass


class AsymmetricMeasure(WeylWalkError, ValueError):
    pass


class SolverFailure(WeylWalkError, RuntimeError):
    pass


class DegenerateCovariance(WeylWalkError, ValueError):
    pass


class NonPositiveLeadEigenvalue(WeylWalkError, ValueError):
    pass


class HessianMismatch(WeylWalkError, AssertionError):
    pass


class GapViolation(WeylWalkError, ValueError):
    pass


class TruncationInsufficient(WeylWalkError, RuntimeError):
    pass


class RhoZeroInExactNS(WeylWalkError, ValueError):
    pass


class UnknownSubcommand(WeylWalkError, ValueError):
    pass


class ConfigParseError(WeylWalkError, ValueError):
    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
