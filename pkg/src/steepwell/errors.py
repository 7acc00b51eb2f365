"""Exception hierarchy shared by every module."""


class SteepWellError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""


class ConfigError(SteepWellError):
    pass


class InvalidGeometry(ConfigError):
    pass


class InvalidExponent(ConfigError):
    pass


class InvalidLambda(ConfigError):
    pass


class OutOfDomain(SteepWellError):
    pass


class DimensionTooLow(SteepWellError):
    pass


class UndefinedForm(SteepWellError):
    """The negative-part form vanishes identically (min(a0, b0) >= 0)."""


class NotFound(SteepWellError):
    pass


class ResourceLimit(SteepWellError):
    pass


class FactorizationFailure(SteepWellError):
    pass


class InsufficientRange(SteepWellError):
    pass


class PrerequisiteFailed(SteepWellError):
    pass


class QuadratureOverflow(SteepWellError):
    pass


class SolverError(SteepWellError):
    """Base for solver failures; carries the partial trace when available."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class GeometryNotFound(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class DegenerateToZero(SolverError):
    pass


class InnerMaxDiverged(SolverError):
    pass
