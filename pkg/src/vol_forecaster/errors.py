"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid parameter or configuration field."""


class FormatError(ValueError):
    """Malformed input file."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class InsufficientDataError(ValueError):
    """Not enough history to compute the requested quantity."""


class EmptyUniverseError(InsufficientDataError):
    """No firm survives a balanced-window filter."""


class SingularDesignError(ValueError):
    """Regression design matrix is rank deficient."""


class DegenerateError(ValueError):
    """Constant regressor or series, or a zero denominator in portfolio math."""


class CrossedQuoteError(ValueError):
    """Bid above ask."""


class DataError(ValueError):
    """Non-finite or non-positive data where positive finite data is required."""


class UsageError(ValueError):
    """Invalid command-line usage."""


class ConvergenceError(RuntimeError):
    """Coordinate descent stopped at max_iter without converging."""

    def __init__(self, msg: str, gap: float) -> None:
        """Initialize the error.

        :param msg: Error message.
        :param gap: Duality gap at the last iterate.
        """
        super().__init__(msg)
        self.gap = gap


class TuningError(RuntimeError):
    """Every hyperparameter candidate failed to fit."""


class LeakageError(RuntimeError):
    """A forecaster requested data stamped after its filtration cutoff."""


class LagViolationError(RuntimeError):
    """A sorting signal is not strictly earlier than its return interval."""


class BacktestError(RuntimeError):
    """A backtest produced no forecasts at all."""


# Failures that turn into a recorded gap for one firm-date
MODEL_FAILURES: tuple[type[Exception], ...] = (
    InsufficientDataError,
    SingularDesignError,
    ConvergenceError,
    DegenerateError,
    DomainError,
)
