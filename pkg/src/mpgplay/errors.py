class GameParseError(ValueError):
    """Malformed game document."""


class GameValidationError(ValueError):
    """Game violates a structural or stochasticity invariant."""


class MissingPotentialError(ValueError):
    pass


class InvalidConfigError(ValueError):
    pass


class NumericalBlowUp(FloatingPointError):
    """A trajectory produced a non-finite quantity.

    ``record`` holds the rows gathered before the failure.
    """

    def __init__(self, iteration, message, record=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.record = record


class SearchSpaceTooLarge(ValueError):
    pass
