"""Exception and warning types raised across the package."""


class DynLogitError(Exception):
    """Base class for all package errors."""


class InputError(DynLogitError):
    """Problem with user-supplied data or configuration."""


class MalformedRow(InputError):
    pass


class InconsistentPanel(InputError):
    pass


class IdentificationError(InputError):
    """Panel too short (T < p + 2) or parameter restrictions missing."""


class DimensionMismatch(InputError):
    pass


class WrongShape(InputError):
    pass


class NumericalError(DynLogitError):
    """Failure inside an optimizer or a linear-algebra step."""


class DegenerateObjective(NumericalError):
    """No informative block contributes to the objective."""


class SingularHessian(NumericalError):
    pass


class RankDeficientMoments(NumericalError):
    pass


class ZeroConditioningEvent(NumericalError):
    pass


class EnumerationLimit(DynLogitError):
    """Exhaustive enumeration would exceed the configured path cap."""


class NonConvergenceWarning(RuntimeWarning):
    pass


class SingularWeightWarning(RuntimeWarning):
    pass
