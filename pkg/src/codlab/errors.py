"""Exception types shared across the package."""


class CodlabError(Exception):
    """Base class for all library errors."""


class DomainViolation(CodlabError, ValueError):
    """A point lies outside (or too close to the boundary of) a chart domain."""


class DerivativeUnavailable(CodlabError):
    """An analytic derivative was requested but no evaluator was supplied."""


class NotAHypersurface(CodlabError, ValueError):
    pass


class NotAGraphChart(CodlabError, TypeError):
    """A graph-gauge operation was called on a parametric chart."""


class DimensionMismatch(CodlabError, ValueError):
    pass


class NotADistribution(CodlabError, ValueError):
    """The line field is not tangent to the base manifold."""


class BoundaryConditionViolated(CodlabError, ValueError):
    pass


class BadDirection(CodlabError, ValueError):
    pass


class BadGrid(CodlabError, ValueError):
    pass


class InsufficientSamples(CodlabError):
    pass


class FullRankFailure(CodlabError):
    pass


class ResidualTestFailed(CodlabError):
    pass


class DegenerateRuling(CodlabError, ValueError):
    pass


class IntegrationUnstable(CodlabError):
    pass


class NoSuchField(CodlabError, ValueError):
    pass


class SingularTransform(CodlabError, ValueError):
    pass


class NotStrictlyConvex(CodlabError, ValueError):
    pass


class ConfigError(CodlabError, ValueError):
    """Invalid experiment configuration."""


class UnknownExperiment(CodlabError, KeyError):
    pass


class EmptySlice(UserWarning):
    """Warning: a rendered slab contained no points."""
