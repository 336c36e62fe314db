"""Exception hierarchy.

Validation errors (bad input, violated preconditions) map to CLI exit code 2;
numerical failures map to exit code 3.
"""


class KECollapseError(Exception):
    """Base class for all package errors."""


class ValidationError(KECollapseError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(KECollapseError, ArithmeticError):
    """A numerical procedure failed to deliver its contract."""


# toric core
class NotFullDimensional(ValidationError):
    pass


class NonSimplicial(ValidationError):
    pass


class NotGorenstein(ValidationError):
    pass


class DegenerateParameter(ValidationError):
    pass


class NonPositiveModulus(ValidationError):
    pass


class EmptyDomain(ValidationError):
    pass


# Monge-Ampere solver
class DomainViolation(ValidationError):
    pass


class ResolutionTooCoarse(ValidationError):
    pass


class NewtonDiverged(NumericalError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class LossOfConvexity(NumericalError):
    pass


# semi-flat metric
class BoundaryTooClose(ValidationError):
    pass


class ZeroForm(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


# tropical
class EmptyVariety(ValidationError):
    pass


class RootSolveFailure(NumericalError):
    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class EmptyAfterClip(ValidationError):
    pass


# degenerations
class InvalidFixture(ValidationError):
    pass


class NonConvexPsi(ValidationError):
    def __init__(self, message, facet=None):
        super().__init__(message)
        self.facet = facet


class NonIntegralSlope(ValidationError):
    pass


class NotGorensteinLocally(ValidationError):
    pass
