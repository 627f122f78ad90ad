"""Exception hierarchy shared by every module."""


class FLBOError(Exception):
    """Base class for all errors raised by flbo."""


class MalformedInputError(FLBOError, ValueError):
    """Input arrays have the wrong shape or contain non-finite values."""


class InvalidMetricError(FLBOError, ValueError):
    """A Randers metric violates SPD-ness or the drift bound."""


class ConfigurationError(FLBOError, ValueError):
    """A parameter is out of its admissible range."""


class MeshError(FLBOError, ValueError):
    """A mesh failed to load or violates a structural invariant."""


class AssemblyError(FLBOError):
    """Operator assembly received inconsistent inputs."""


class SolverError(FLBOError, RuntimeError):
    """A numerical solver failed to converge or factorize."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
