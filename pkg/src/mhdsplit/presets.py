"""Initial-data presets for the experiment runner."""

from __future__ import annotations

import numpy as np

from . import spectral as sp
from .errors import ConfigError
from .spectral import Grid, VectorField

__all__ = ["taylor_green", "initial_data", "PRESETS"]


def taylor_green(grid: Grid, amplitude: float) -> VectorField:
    """Classic solenoidal vortex, scaled to the box period."""
    a = 2.0 * np.pi / grid.box_length
    X, Y, Z = grid.coordinates()
    u = np.zeros((3,) + (grid.n,) * 3)
    u[0] = amplitude * np.sin(a * X) * np.cos(a * Y) * np.cos(a * Z)
    u[1] = -amplitude * np.cos(a * X) * np.sin(a * Y) * np.cos(a * Z)
    return sp.vector_from_physical(grid, u, solenoidal=True)


def _taylor_green_shifted(grid: Grid, amplitude: float) -> VectorField:
    # quarter-period phase shift in x and y keeps the field solenoidal
    a = 2.0 * np.pi / grid.box_length
    X, Y, Z = grid.coordinates()
    u = np.zeros((3,) + (grid.n,) * 3)
    u[0] = -amplitude * np.cos(a * X) * np.sin(a * Y) * np.cos(a * Z)
    u[1] = amplitude * np.sin(a * X) * np.cos(a * Y) * np.cos(a * Z)
    return sp.vector_from_physical(grid, u, solenoidal=True)


def initial_data(
    grid: Grid, preset: str, seed: int = 0, amplitude: float = 0.1, decay: float = 2.0
) -> tuple[VectorField, VectorField]:
    """(v0, h0) for one of the named presets.

    taylor_green: vortex velocity with a half-amplitude quarter-phase
    magnetic copy; elsasser_aligned: h0 = v0 (exact nonlinear cancellation);
    random: seeded divergence-free spectra for both fields.
    """
    if preset == "taylor_green":
        return taylor_green(grid, amplitude), _taylor_green_shifted(grid, 0.5 * amplitude)
    if preset == "elsasser_aligned":
        v0 = taylor_green(grid, amplitude)
        return v0, v0
    if preset == "random":
        v0 = sp.random_divfree_field(grid, seed=seed, amplitude=amplitude, decay=decay)
        h0 = sp.random_divfree_field(grid, seed=seed + 77, amplitude=0.5 * amplitude, decay=decay)
        return v0, h0
    raise ConfigError(f"unknown preset {preset!r}")


PRESETS = ("taylor_green", "elsasser_aligned", "random")
