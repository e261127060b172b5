"""Numerical verification and construction of rotationally symmetric conformal gradient solitons."""

from .errors import (
    DegenerateMetricError,
    InconsistentClosingError,
    InputError,
    NonSmoothClosingError,
    PreconditionError,
    SolitonLabError,
    SolverFailure,
    WrongCaseError,
)
from .geometry import FiberDescriptor, WarpedMetric
from .profile import RadialGrid, RadialProfile, analytic_profile, build_profile, sampled_profile

__version__ = "0.1.0"
