"""Custom exceptions for ustat-lab."""


class UstatLabError(ValueError):
    """Base class for every domain error raised by ustat-lab."""


class InvalidMeasureError(UstatLabError):
    """Raised when a space is built from an empty or nonpositive weight list."""


class NotProbabilityError(UstatLabError):
    """Raised when a probability space is required but the weights do not sum to 1."""


class TooLargeError(UstatLabError):
    """Raised when an operation would materialize more elements than the configured guard."""

    def __init__(self, count: int, limit: int) -> None:
        super().__init__(f"operation needs {count} elements, guard is {limit}")
        self.count = count
        self.limit = limit


class BadAxisError(UstatLabError):
    """Raised when an axis position is unknown, repeated or of the wrong kind."""


class NonFiniteValueError(UstatLabError):
    """Raised when a field holds NaN or infinite values."""


class BadLevelError(UstatLabError):
    """Raised when a Hoeffding level or a cut level is out of range."""


class NotNonnegativeError(UstatLabError):
    """Raised when a functional defined for nonnegative kernels receives a negative value."""


class BadSpecError(UstatLabError):
    """Raised when a norm specification does not match the field it is applied to."""


class HigherLevelsPresentError(UstatLabError):
    """Raised when a field has Hoeffding components above the requested level."""


class NotADecompositionError(UstatLabError):
    """Raised when the proposed parts do not sum to the target."""


class BadThresholdError(UstatLabError):
    """Raised when a weight threshold kappa does not exceed the floor epsilon."""


class NotCanonicalError(UstatLabError):
    """Raised when kernels that must be mean zero in every variable are not."""


class BadInstanceError(UstatLabError):
    """Raised when a check instance violates the hypotheses of the inequality it exercises."""


class UndefinedError(UstatLabError):
    """Raised at points where a quantity is not defined (for example a gradient at 0)."""


class BadCheckError(UstatLabError):
    """Raised when a check id is not present in the registry."""


class ConfigError(UstatLabError):
    """Raised when an experiment configuration fails schema or model validation."""
