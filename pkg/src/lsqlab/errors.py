"""Exception types shared across the lab."""


class PreconditionError(ValueError):
    """An operation was called outside its documented parameter range.

    ``condition`` names the violated requirement in words so that callers
    (and the CLI) can surface it verbatim.
    """

    def __init__(self, message: str, condition: str | None = None):
        super().__init__(message)
        self.condition = condition or message


class NumericError(ArithmeticError):
    """Base class for failures of the numerical kernels (exit code 3)."""


class SingularMatrixError(NumericError):
    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(f"{message} (min eigenvalue {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


class AsymmetricMatrixError(ValueError):
    pass


class DegenerateDesignError(NumericError):
    """Too many singular draws in a Monte Carlo loop, or a degenerate probe."""


class InsufficientSamplesError(NumericError):
    def __init__(self, message: str, suggested_budget: int):
        super().__init__(f"{message}; try at least {suggested_budget} samples")
        self.suggested_budget = suggested_budget


class InvalidCharacteristicFunctionError(ValueError):
    pass
