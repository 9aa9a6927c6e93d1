"""Exception types shared across the package."""


class DomainError(ValueError):
    """A workspace point (or a state mapping into one) lies outside the
    exploration box."""


class ContractError(ValueError):
    """An argument violates a documented precondition (dimension mismatch,
    non-positive step, resolution below the Nyquist floor, ...)."""


class DivergedError(RuntimeError):
    """The solver produced a non-finite objective or gradient.

    Carries the last finite iterate so callers can inspect or restart.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
