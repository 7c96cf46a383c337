"""Exception hierarchy shared by every module in the package."""


class HRVFLError(Exception):
    """Base class for all package errors."""


class DomainError(HRVFLError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ConfigError(HRVFLError, ValueError):
    """A configuration object violates its invariants."""


class ShapeError(HRVFLError, ValueError):
    """Array dimensions are inconsistent."""


class TrainingError(HRVFLError):
    """Training data cannot be fitted (e.g. a single class)."""


class LinAlgError(HRVFLError):
    """A linear solve failed on a degenerate design matrix."""


class DataError(HRVFLError, ValueError):
    """A dataset file could not be ingested."""


class DivergenceError(HRVFLError, ArithmeticError):
    """The optimizer produced a non-finite iterate or gradient.

    ``state`` holds the last finite optimizer state.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
