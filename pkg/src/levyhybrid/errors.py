"""Exception hierarchy for the levyhybrid package."""


class LevyHybridError(Exception):
    """Base class for all package errors."""


class DivergentMomentError(LevyHybridError):
    """A requested jump-size moment is infinite.

    This is a reportable domain outcome (the moment condition fails), not a
    numerical failure; callers that gate on the moment condition should catch
    it and report the failing order.
    """

    def __init__(self, message: str, order: float | None = None):
        super().__init__(message)
        self.order = order


class NonIntegrableTailError(LevyHybridError):
    """The tail mass of a continuous intensity is infinite, so no truncation
    to compound-Poisson form exists at the requested level."""


class QuadratureError(LevyHybridError):
    """Adaptive quadrature could not certify the requested tolerance."""


class InstabilityError(LevyHybridError):
    """A system matrix is not Hurwitz where stability is required."""


class AlphaFloorError(LevyHybridError):
    """The uniform decay rate over the parameter box fell below the floor."""


class ContainmentError(LevyHybridError):
    """The parameter process left its compact box under the 'fail' rule."""


class ConfigError(LevyHybridError):
    """A scenario config failed structural or semantic validation."""


class PreconditionError(LevyHybridError):
    """A scenario precondition (e.g. the moment condition) does not hold."""
