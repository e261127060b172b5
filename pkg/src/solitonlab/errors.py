"""Exception hierarchy.

The CLI maps :class:`InputError` (and subclasses) to exit code 2.
"""


class SolitonLabError(Exception):
    """Base class for every error raised by the package."""


class InputError(SolitonLabError, ValueError):
    """Malformed or inconsistent user input."""


class PreconditionError(SolitonLabError):
    """An operation was called outside its domain of validity."""


class DegenerateMetricError(PreconditionError):
    """The warp vanishes (or is negative) where the metric is evaluated."""


class WrongCaseError(PreconditionError):
    """The critical-point pattern does not match the requested chart."""


class InconsistentClosingError(PreconditionError):
    """A closing end was requested but the fiber curvature is not positive."""


class NonSmoothClosingError(PreconditionError):
    """The warp closes with the wrong slope, leaving a conical point."""


class SolverFailure(SolitonLabError):
    """Raised inside the ODE right-hand side; ``shoot`` turns it into an event."""

    kind = "solver-failure"


class StiffnessError(SolverFailure):
    kind = "stiff"


class BranchError(SolverFailure):
    kind = "branch"
