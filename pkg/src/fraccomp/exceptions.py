"""Exception hierarchy shared by all fraccomp modules."""


class FracCompError(Exception):
    """Base class for errors raised by fraccomp."""


class InvalidArgumentError(FracCompError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateModelError(FracCompError):
    """The model is not identified at the supplied parameters (rank loss, singularity)."""


class UnsupportedRepresentationError(FracCompError):
    """The requested cointegration representation does not exist for this structure."""


class NumericalFailureError(FracCompError):
    """A numerical routine broke down (e.g. a non-positive-definite innovation covariance)."""

    def __init__(self, message, time_index=None):
        super().__init__(message)
        self.time_index = time_index


class ApproximationFailureError(NumericalFailureError):
    """The ARMA approximation of a fractional filter could not be computed."""


class DataError(FracCompError):
    """Input data could not be parsed or failed validation."""

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = list(rows) if rows is not None else []
