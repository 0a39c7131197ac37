"""Exception hierarchy shared by every module."""


class BoundOptError(Exception):
    """Base class for all library errors."""


class DimensionError(BoundOptError, ValueError):
    pass


class NumericError(BoundOptError, ArithmeticError):
    """A computation produced a non-finite value or failed to converge."""


class SingularMatrixError(NumericError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NotConvergedError(NumericError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BoundViolationError(BoundOptError):
    def __init__(self, message, before=None, after=None):
        super().__init__(message)
        self.before = before
        self.after = after


class UnsupportedCapabilityError(BoundOptError, NotImplementedError):
    pass


class InsufficientDataError(BoundOptError, ValueError):
    pass


class DegenerateError(NumericError):
    """An update hit an empty mixture component, dead HMM state, or missing class."""


class InnerSolveError(NumericError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BoundaryError(BoundOptError, ValueError):
    pass


class ConfigError(BoundOptError, ValueError):
    pass


class IncomparableRunsError(BoundOptError, ValueError):
    pass
