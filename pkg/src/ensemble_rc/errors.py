"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateMatrixError(ValueError):
    """A matrix cannot be rescaled because its spectral radius is zero."""


class SingularityError(ArithmeticError):
    """The radial input direction of a Stuart-Landau state is undefined."""

    def __init__(self, message, step=None, trial=None):
        super().__init__(message)
        self.step = step
        self.trial = trial


class DivergenceError(ArithmeticError):
    """A state became non-finite or exceeded the magnitude guard."""

    def __init__(self, message, step=None, trial=None):
        super().__init__(message)
        self.step = step
        self.trial = trial


class UndefinedMetricError(ValueError):
    """A metric is undefined for the given data (e.g. zero variance)."""


class PoisonedFeatureError(ValueError):
    """A feature column contains non-finite values."""


class UnsupportedDistributionError(ValueError):
    """The capacity basis does not match the input distribution."""


class DegeneratePerturbationError(ArithmeticError):
    """A Lyapunov separation vector collapsed to zero."""


class InstabilityError(ArithmeticError):
    """A target recursion (NARMA10) left its stable range."""
