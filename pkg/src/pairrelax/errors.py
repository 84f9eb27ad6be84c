"""Exception hierarchy shared by every module."""


class PairRelaxError(Exception):
    """Base class for all errors raised by this package."""


class ParameterDomainError(PairRelaxError, ValueError):
    """A potential or algorithm parameter is outside its admissible range."""


class ShapeError(PairRelaxError, ValueError):
    """Array shape or grid dimension does not match what was expected."""


class GridMismatchError(ShapeError):
    """Two objects that must live on the same grid do not."""


class SolverError(PairRelaxError):
    """The interior-point solve did not reach an optimal point."""

    def __init__(self, message, status=None, iterations=None):
        super().__init__(message)
        self.status = status
        self.iterations = iterations


class CertificateInconsistent(PairRelaxError):
    """The dual decomposition or a guarantee fails its own identity."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotAtomic(PairRelaxError):
    """An operation that needs atomic structure received a continuous solution."""


class DivergentRatio(PairRelaxError):
    """Autocorrelation vanishes where the target is positive (KL is infinite)."""


class InternalError(PairRelaxError):
    """A guaranteed algorithmic property was violated (e.g. KL increased)."""
