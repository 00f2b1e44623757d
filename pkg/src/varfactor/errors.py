"""Exception hierarchy shared by all varfactor modules."""


class VarFactorError(Exception):
    """Base class for every error raised by varfactor."""


class DimensionMismatch(VarFactorError, ValueError):
    pass


class AmbiguousRoot(VarFactorError):
    """An eigenvalue falls inside two classification bands at once."""


class PreconditionViolation(VarFactorError):
    """Input does not have the spectral structure an operation requires."""

    def __init__(self, message, roots=None):
        super().__init__(message)
        self.roots = roots


class RankMismatch(VarFactorError):
    pass


class NoConvergence(VarFactorError):
    pass


class IrregularUnitRoot(PreconditionViolation):
    pass


class NonvanishingTail(VarFactorError):
    pass


class SingularMap(VarFactorError):
    pass


class NotSemiOrthogonal(VarFactorError, ValueError):
    pass


class Unstable(PreconditionViolation):
    pass


class SingularLeadingBlock(VarFactorError):
    pass


class IndefiniteResult(VarFactorError):
    pass


class CayleySingular(VarFactorError):
    pass


class SingularRegressors(VarFactorError):
    pass


class IndefiniteAutocovariance(VarFactorError):
    pass


class DecodeFailure(VarFactorError):
    pass


class DegenerateResiduals(VarFactorError):
    pass


class NoImprovement(VarFactorError):
    pass


class ShortSeries(VarFactorError):
    pass


class ExplosiveGenerator(VarFactorError):
    pass


class BenchmarkAborted(VarFactorError):
    """Too many Monte Carlo replications failed to fit."""
