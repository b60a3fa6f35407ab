"""Exception hierarchy shared by every module of the package."""


class NlvarError(Exception):
    """Base class for all package errors."""


class DomainError(NlvarError, ValueError):
    """A parameter lies outside the range where the computation is defined."""


class SingularPair(NlvarError, ValueError):
    """Two cells overlap, so their kernel interaction diverges."""


class SpecError(NlvarError, ValueError):
    """Mesh (or other structural) parameters violate an invariant."""


class AlphaMismatch(NlvarError, ValueError):
    """A weight table was assembled for a different kernel exponent."""


class ExteriorMismatch(NlvarError, ValueError):
    """Two fields that must share exterior data do not."""


class ShapeMismatch(NlvarError, ValueError):
    """Array shapes of a field and a certificate do not agree."""


class TooLarge(NlvarError, ValueError):
    """Exhaustive enumeration requested on too many cells."""


class ScheduleError(NlvarError, ValueError):
    """A parameter schedule leaves the admissible region."""


class ParamError(NlvarError, ValueError):
    """Invalid generator parameters."""


class ConfigError(NlvarError, ValueError):
    """An experiment configuration is incomplete or malformed.

    ``field`` names the offending configuration key.
    """

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"invalid or missing config field: {field!r}")


class NoConvergence(NlvarError, RuntimeError):
    """An iterative solver exhausted its budget."""

    def __init__(self, iters, residual, message=None):
        self.iters = iters
        self.residual = residual
        super().__init__(message or f"no convergence after {iters} iterations (residual {residual:.3e})")
