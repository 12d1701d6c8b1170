"""Exception hierarchy shared by every qw1 module."""


class QW1Error(Exception):
    """Base class for all library errors."""


class InvariantViolation(QW1Error):
    """A constructed value broke one of its declared invariants."""


class RegionOverlap(QW1Error):
    pass


class RegionMismatch(QW1Error):
    pass


class SizeCap(QW1Error):
    """Hilbert-space dimension or support size exceeds the configured cap."""


class NotTraceless(QW1Error):
    pass


class NonPositiveDefinite(QW1Error):
    pass


class NotProduct(QW1Error):
    pass


class NotFullRank(QW1Error):
    pass


class InconsistentMarginals(QW1Error):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class MaxIterExceeded(QW1Error):
    """Raised by solvers in strict mode; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
