"""Exception hierarchy shared by all euafnet modules."""


class EuafError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteError(EuafError, ArithmeticError):
    """A NaN or infinity appeared in an input or an intermediate value."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class NetworkFormatError(EuafError, ValueError):
    """A serialized network or composition document could not be parsed."""


class InfeasibleTolerance(EuafError):
    """The requested tolerance cannot be reached at desk scale."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class IndexerError(EuafError):
    """An indexer network violates its sub-interval contract."""

    def __init__(self, message, deviation):
        super().__init__(message)
        self.deviation = deviation


class FitFailed(EuafError):
    """A fit did not reach its tolerance. ``report`` holds the best attempt."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class ClipRangeError(EuafError, ValueError):
    """A raw inner network leaves [-1, 2], where the clip identity holds."""


class CompositionError(EuafError, ValueError):
    """A KST composition is structurally invalid."""


class SubFitError(EuafError):
    """One component fit of the multivariate pipeline failed."""

    def __init__(self, component, cause):
        super().__init__(f"{component} fit failed: {cause}")
        self.component = component
        self.cause = cause


class WidthMismatch(EuafError, ValueError):
    """The two-point certificate only applies to width d-1 first layers."""
