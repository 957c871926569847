"""Exact and Monte Carlo tools for the longest excursion of a pinned polymer."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AssumptionNotSatisfied,
    DegenerateHorizon,
    DomainError,
    EmptySample,
    ExcursionLabError,
    HorizonTooLarge,
    InputError,
    NoBracket,
    TooLarge,
    ValidationFailure,
)
from .laws import SRW1D, ExcursionLaw, Tabulated, TwoPoint, Zeta, parse_law  # noqa: F401
from .tilt import TiltedModel, build_tilted, solve_free_energy  # noqa: F401
