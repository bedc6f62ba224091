"""Exception hierarchy shared by the solvers and the command line tool."""


class RpcaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(RpcaError, ValueError):
    """Input data is malformed (non-finite entries, wrong shape, ...)."""


class InvalidArgumentError(RpcaError, ValueError):
    """A parameter is outside its admissible range."""


class DegenerateRowError(InvalidInputError):
    """A row has (numerically) zero Euclidean norm."""

    def __init__(self, index, norm=0.0):
        self.index = int(index)
        self.norm = float(norm)
        super().__init__(f"row {self.index} is degenerate (norm {self.norm:.3e})")


class DegenerateColumnError(InvalidInputError):
    """A column has zero robust scale and cannot be standardized."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"column {self.index} has zero MADN")


class ResourceLimitError(RpcaError):
    """The requested computation exceeds the configured size limit."""


class ConvergenceError(RpcaError, RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    ``best`` carries the last (or best) iterate so callers can inspect or
    reuse it; ``residual`` is the achieved value of the stopping statistic.
    """

    def __init__(self, message, best=None, residual=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class DegenerateTrialError(RpcaError):
    """A rounding trial produced X^T y = 0; the trial must be skipped."""


class RankDeficientError(RpcaError):
    """Fewer meaningful components exist than were requested."""

    def __init__(self, requested, achieved):
        self.requested = int(requested)
        self.achieved = int(achieved)
        super().__init__(
            f"requested {self.requested} components but the matrix has rank {self.achieved}"
        )
