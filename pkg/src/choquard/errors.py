"""Exception hierarchy shared by all modules."""


class ChoquardError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ChoquardError, ValueError):
    """An argument lies outside the range where the operation is defined."""


class ConvergenceError(ChoquardError, RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    The last iterate is attached as ``state`` when one is available.
    """

    def __init__(self, message, state=None, iterations=None):
        super().__init__(message)
        self.state = state
        self.iterations = iterations


class InsufficientDecayError(ChoquardError):
    """The truncation radius is too small for a tail fit."""


class SpectralError(ChoquardError, RuntimeError):
    """Eigen- or linear-solve failure on an assembled operator."""


class SweepError(ChoquardError, RuntimeError):
    """A continuation sweep aborted; carries the records computed so far."""

    def __init__(self, message, records, p):
        super().__init__(message)
        self.records = records
        self.p = p
