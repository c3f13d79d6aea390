"""Exception hierarchy shared by all fdelab modules."""


class FdeLabError(Exception):
    """Base class for every error raised by fdelab."""


class InvalidFieldError(FdeLabError, ValueError):
    pass


class DomainError(FdeLabError, ValueError):
    pass


class DimensionError(FdeLabError, ValueError):
    pass


class UsageError(FdeLabError, ValueError):
    pass


class UnsupportedModelError(FdeLabError):
    pass


class SolverError(FdeLabError):
    """Raised when time stepping cannot proceed."""


class StiffnessError(SolverError):
    """Picard iteration failed to contract at a time node."""

    def __init__(self, message, t=None, index=None, residuals=()):
        super().__init__(message)
        self.t = t
        self.index = index
        self.residuals = tuple(residuals)


class ModelError(SolverError):
    """The right-hand side produced a non-finite value."""


class PropertyFailure(FdeLabError, AssertionError):
    """A verified inequality was violated; ``witness`` carries the offending data."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
