"""Exception types shared across the package."""


class NumericalFailure(RuntimeError):
    """An iterative routine broke an invariant it is supposed to maintain.

    Carries enough context (iteration index, offending quantity) to
    reproduce the failure.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConfigValidationError(ValueError):
    """A solver configuration violates a hard parameter bound."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonStationaryPointError(ValueError):
    """A point handed to a stationary-point-only routine is not stationary."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual
