"""Exception hierarchy.

Input-guard violations (bad k, bad exponent, points outside the domain) are
``GuardError``; the CLI maps them to exit code 2.  Everything that goes wrong
inside a computation is a ``NumericalError`` and maps to exit code 1.
"""


class GuardError(ValueError):
    """A hypothesis of the problem is violated by the input.

    Attributes
    ----------
    guard : str
        Short machine-readable guard name, e.g. ``"nonexistence"``.
    inequality : str
        The violated inequality written out, e.g. ``"k = -0.5 <= 0"``.
    """

    def __init__(self, guard, inequality, message=None):
        self.guard = guard
        self.inequality = inequality
        super().__init__(message or f"{guard} guard violated: {inequality}")


class DomainError(GuardError):
    """A coordinate (r, tau, beta, ...) lies outside the admissible range."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure."""


class PicardConvergenceError(NumericalError):
    def __init__(self, message, contraction=None):
        self.contraction = contraction
        super().__init__(message)


class StepSizeError(NumericalError):
    pass


class EventRefinementError(NumericalError):
    pass


class TrajectoryRangeError(NumericalError):
    """A query needs the trajectory beyond its integrated range.

    ``needed_s`` is the coordinate value that has to be covered; callers
    extend the trajectory to it and retry.
    """

    def __init__(self, message, needed_s=None):
        self.needed_s = needed_s
        super().__init__(message)


class InconclusiveError(NumericalError):
    def __init__(self, message, recommended_s_min=None):
        self.recommended_s_min = recommended_s_min
        super().__init__(message)


class ClassificationDiscrepancy(NumericalError):
    """Empirical curve type disagrees with the closed-form prediction."""


class NonSolutionError(NumericalError):
    """Samples handed to a comparison routine do not solve their ODE."""
