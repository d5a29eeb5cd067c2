"""Exception types raised by the numerical pipeline."""


class DemonError(Exception):
    """Base class for all errors raised by qdemon."""


class ConfigError(DemonError, ValueError):
    pass


class QuadratureFailure(DemonError):
    """Adaptive quadrature could not reach the requested tolerance."""


class DegenerateFixedPoint(DemonError):
    """The one-period propagator has a (numerically) doubly degenerate eigenvalue 1."""


class MomentToleranceFailure(DemonError):
    """Finite-difference and analytic moment evaluations disagree."""


class ConservationViolation(DemonError):
    pass


class SecondLawViolation(DemonError):
    pass


class CutoffRequired(DemonError):
    """An energy-weighted coupling integral diverges without finite cutoffs."""


class HorizonExceeded(DemonError):
    """Requested time exceeds the recurrence time of the discretized bath."""


class DegenerateBranch(DemonError):
    """A measurement branch has vanishing probability."""
