"""Exception types shared across the package."""


class ExcursionLabError(Exception):
    """Base class for all package errors."""


class InputError(ExcursionLabError, ValueError):
    """Bad user input; the CLI maps this family to exit code 2."""


class AssumptionNotSatisfied(InputError):
    """The law has no power-law tail (D, alpha)."""


class ValidationFailure(InputError):
    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class DomainError(InputError):
    pass


class TooLarge(InputError):
    pass


class EmptySample(InputError):
    pass


class NoBracket(ExcursionLabError):
    """The free-energy residual does not change sign on the bracket."""


class DegenerateHorizon(ExcursionLabError):
    pass


class HorizonTooLarge(ExcursionLabError, MemoryError):
    pass
