"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MhdSplitError(Exception):
    """Base class for all package errors."""


class InvalidGrid(MhdSplitError, ValueError):
    """Grid construction violates a precondition (odd n, n < 4, bad box length)."""


class GridMismatch(MhdSplitError, ValueError):
    """Two fields or trajectories live on incompatible grids."""


class NodeMismatch(MhdSplitError, ValueError):
    """Two trajectories carry different time nodes."""


class EmptyTrajectory(MhdSplitError, ValueError):
    """A time-indexed operation received no nodes."""


class NegativeTime(MhdSplitError, ValueError):
    """Heat flow requested for t < 0."""


class InvalidConstants(MhdSplitError, ValueError):
    """Contraction constants violate their preconditions or fail probe validation."""


class ConditionViolated(MhdSplitError, RuntimeError):
    """Quadratic fixed-point condition fails, or an iterate escapes the certified ball."""


class NoConvergence(MhdSplitError, RuntimeError):
    """Picard iteration hit the iteration cap before reaching tolerance."""


class WindowCollapse(MhdSplitError, RuntimeError):
    """No admissible solve window of at least two steps satisfies the contraction condition."""


class ScalingViolation(MhdSplitError, ValueError):
    """A mixed-norm exponent pair misses the required scaling relation."""


class NegativeWeight(MhdSplitError, ValueError):
    """A Gronwall weight sample is negative."""


class UnsupportedTestFunction(MhdSplitError, ValueError):
    """Local-energy test function touches the time boundary of the trajectory."""


class InvalidParams(MhdSplitError, ValueError):
    """Scheme or experiment parameters violate a precondition."""


class ConfigError(MhdSplitError, ValueError):
    """Run configuration failed schema validation."""
