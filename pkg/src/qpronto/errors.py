"""Exception types shared across the solver stack."""


class QprontoError(Exception):
    """Base class for all library errors."""


class ProblemFormatError(QprontoError):
    """A problem file failed validation; the message names section and field."""


class NonFiniteError(QprontoError):
    """A forward or backward integration produced non-finite values."""


class NonFiniteRiccati(NonFiniteError):
    """The regulator Riccati sweep diverged (grid too coarse or bad weights)."""


class RiccatiFailure(QprontoError):
    """The optimizer Riccati sweep failed; callers fall back to quasi-Newton
    weights. Raised when the input weight loses positive definiteness, when
    the value matrix blows up, or when entries become non-finite."""


class SolveError(QprontoError):
    """Solver terminated abnormally; ``result`` holds the partial outcome."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class MaxIterationsExceeded(SolveError):
    """Iteration budget exhausted before the descent tolerance was met."""


class ArmijoStall(SolveError):
    """Backtracking line search shrank below the minimum step size."""
