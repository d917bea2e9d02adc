"""Pseudo-spectral caloric-splitting solver for 3D incompressible MHD.

The package builds global-in-time approximations of the MHD Cauchy
problem on a periodic box by splitting the solution into the heat flow of
the initial data plus a finite-energy perturbation, solving the mollified
perturbation system window by window through a certified quadratic
fixed-point iteration, and auditing every energy inequality the
construction is supposed to satisfy.
"""

__version__ = "0.1.0"

from . import caloric, calibration, fixedpoint, presets, scheme, spectral, uniqueness, verify
from .errors import (
    ConditionViolated,
    ConfigError,
    EmptyTrajectory,
    GridMismatch,
    InvalidConstants,
    InvalidGrid,
    InvalidParams,
    MhdSplitError,
    NegativeTime,
    NegativeWeight,
    NoConvergence,
    NodeMismatch,
    ScalingViolation,
    UnsupportedTestFunction,
    WindowCollapse,
)

__all__ = [
    "__version__",
    "spectral",
    "caloric",
    "fixedpoint",
    "scheme",
    "verify",
    "uniqueness",
    "calibration",
    "presets",
    "MhdSplitError",
    "InvalidGrid",
    "GridMismatch",
    "NodeMismatch",
    "EmptyTrajectory",
    "NegativeTime",
    "NegativeWeight",
    "InvalidConstants",
    "ConditionViolated",
    "NoConvergence",
    "WindowCollapse",
    "ScalingViolation",
    "UnsupportedTestFunction",
    "InvalidParams",
    "ConfigError",
]
