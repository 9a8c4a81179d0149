"""Exception hierarchy.

Errors split into two families so callers (and the CLI exit codes) can tell a
bad request apart from a computation that did not work out.
"""


class CapgeoError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CapgeoError, ValueError):
    """The input violates a precondition (geometry, angle range, state)."""


class NumericalError(CapgeoError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class ConfigError(CapgeoError):
    """Unparseable or inconsistent run configuration / metric file."""


# geom
class TipSingularity(DomainError):
    pass


class NotOnBoundary(DomainError):
    pass


class NonConvexBoundary(DomainError):
    pass


class NonFiniteCurvature(NumericalError):
    pass


class LeftChart(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


# curve
class InvalidTheta(DomainError):
    pass


class InvalidDomain(DomainError):
    pass


class NoEndpoints(DomainError):
    pass


class DegenerateTangent(DomainError):
    pass


class EmptyCurve(DomainError):
    pass


# flow
class StepTooLarge(NumericalError):
    pass


class EmbeddednessLost(NumericalError):
    pass


# capillary
class NoArrival(NumericalError):
    pass


class ResidualTooLarge(DomainError):
    pass


# minmax
class DegreeCheckFailed(NumericalError):
    pass


class ContinuityCheckFailed(NumericalError):
    pass


class RowHasSentinel(DomainError):
    pass


# cone
class BlendFailure(NumericalError):
    pass


class LeavesConeRegion(DomainError):
    pass
