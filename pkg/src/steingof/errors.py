"""Exception hierarchy shared by all modules."""


class SteinGofError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(SteinGofError, ValueError):
    """Invalid distribution or model parameter."""


class DomainError(SteinGofError, ValueError):
    """Input outside the domain of a function (non-finite values, wrong shape)."""


class ScoreUnavailableError(SteinGofError, NotImplementedError):
    """The law has no closed-form score / log-density in this package."""


class DegenerateSampleError(SteinGofError, ValueError):
    """Sample too small or too concentrated for the requested statistic."""


class SingularMatrixError(SteinGofError, ValueError):
    """A covariance or regressor matrix is singular or not positive definite."""


class NumericError(SteinGofError, ArithmeticError):
    """Numerical failure inside a recursion; carries the offending time index."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class FitError(SteinGofError, RuntimeError):
    """Model estimation failed (e.g. the QMLE did not converge)."""


class SimulationError(SteinGofError, RuntimeError):
    """A simulated recursion exploded or produced non-finite values."""


class BootstrapError(SteinGofError, RuntimeError):
    """Too many bootstrap replicates failed."""
