"""Exception and warning types shared across the package."""


class SvlaserError(Exception):
    """Base class for all package-specific errors."""


class InvalidSpaceError(SvlaserError, ValueError):
    """Raised for unusable Hilbert-space specifications (e.g. dim < 2)."""


class ShapeMismatchError(SvlaserError, ValueError):
    """Raised when operator/state dimensions are incompatible."""


class StateValidationError(SvlaserError, ValueError):
    """Raised when a state fails its normalization/Hermiticity/positivity checks."""


class UnphysicalParameterError(SvlaserError, ValueError):
    """Raised for parameter values outside the physically meaningful range."""


class NumericDomainError(SvlaserError, ValueError):
    """Raised on non-finite input to a numeric kernel."""


class UndefinedStatisticError(SvlaserError, ValueError):
    """Raised when a statistic is requested where it is undefined (e.g. Mandel Q at <n> = 0)."""


class TruncationError(SvlaserError, RuntimeError):
    """Raised when a constructed state leaks past the truncation-tail threshold."""


class StiffnessError(SvlaserError, RuntimeError):
    """Raised on integrator step-size underflow."""


class NumericalFailureError(SvlaserError, RuntimeError):
    """Raised when an evolution violates a physical invariant beyond tolerance."""


class DegenerateSteadyStateError(SvlaserError, RuntimeError):
    """Raised when a Liouvillian null space has dimension > 1."""


class ConfigError(SvlaserError, ValueError):
    """Raised for unparseable, unknown, or inconsistent configuration keys."""


class TruncationWarning(UserWarning):
    """Emitted when an operation pushes noticeable population toward the truncation edge."""
