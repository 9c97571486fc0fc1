"""Exception hierarchy."""


class OptAttackError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(OptAttackError, ValueError):
    """A query point or argument has the wrong shape or non-finite entries."""


class ModelLoadError(OptAttackError):
    """A model file could not be parsed; ``location`` names the offending element."""

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class DatasetError(OptAttackError):
    """A dataset file is malformed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ContractError(OptAttackError):
    """A documented precondition of an operation does not hold."""


class QueryBudgetExceeded(OptAttackError):
    """The oracle refused a query because its budget is spent."""


class InitializationError(OptAttackError):
    """No starting direction with a reachable decision boundary was found."""


class GradientEstimationError(OptAttackError):
    """Every sample of a gradient estimate failed to find the boundary."""


class NoAdversarialFound(OptAttackError):
    """A ground-truth search found no adversarial point in any direction."""


class ConfigError(OptAttackError):
    """An experiment or attack configuration is invalid."""


class FiniteDifferenceError(OptAttackError):
    """Some coordinates of a finite-difference gradient could not be evaluated."""

    def __init__(self, coordinates):
        self.coordinates = list(coordinates)
        super().__init__(f"boundary lost along coordinates {self.coordinates}")
