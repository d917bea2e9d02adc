"""Heat semigroup, caloric extensions, and Duhamel integration.

The heat flow is the exact multiplier exp(-t |k|^2).  Forced problems are
integrated by the semigroup recursion

    U(t_{m+1}) = E U(t_m) + W0 P g(t_m) + W1 P g(t_{m+1}),

where E = exp(-dt |k|^2) and W0, W1 are the exponential-trapezoid weights
built from the phi functions phi1(z) = (e^z - 1)/z and
phi2(z) = (e^z - 1 - z)/z^2.  The rule is exact per mode whenever the
forcing is linear in time on each subinterval; in particular it is exact
for constant forcing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .errors import EmptyTrajectory, GridMismatch, NegativeTime
from .spectral import Grid, VectorField

__all__ = [
    "CaloricPair",
    "ForcedTrajectory",
    "heat_flow",
    "heat_multiplier",
    "caloric_pair",
    "duhamel",
    "duhamel_weights",
    "stokes_solve",
    "SOLONNIKOV_PAIRS",
]

# Mixed-norm exponent pairs monitored by the forced-Stokes regularity ratio.
SOLONNIKOV_PAIRS = ((1.5, 1.125), (1.5, 4.0 / 3.0), (1.5, 1.2), (1.5, 1.5))


def heat_multiplier(grid: Grid, t: float) -> np.ndarray:
    if t < 0:
        raise NegativeTime(f"heat flow needs t >= 0, got {t}")
    return np.exp(-t * grid.k2)


def heat_flow(f: VectorField, t: float) -> VectorField:
    """e^{t Laplace} f as a diagonal multiplier; preserves solenoidality."""
    mult = heat_multiplier(f.grid, t)
    return VectorField(f.grid, sp._freeze(f.coeff * mult), solenoidal=f.solenoidal)


def _check_times(times: np.ndarray) -> float:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise EmptyTrajectory("need a non-empty 1-d array of time nodes")
    if times.size == 1:
        return 0.0
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-12, atol=1e-14):
        raise ValueError("time nodes must be uniform and increasing")
    return dt


@dataclass(frozen=True)
class CaloricPair:
    """Heat extensions of a pair of initial fields, sampled on uniform nodes.

    ``times`` are absolute; the flow is evaluated at t - times[0], so the
    first node reproduces the initial data exactly.  ``lp_decay`` records
    the per-node L^p norms of the velocity part for p in {2, 3, 4, 5}.
    """

    grid: Grid
    times: np.ndarray
    v1: tuple[VectorField, ...]
    H1: tuple[VectorField, ...]
    v0: VectorField
    h0: VectorField
    lp_decay: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dt(self) -> float:
        return _check_times(self.times)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    def __len__(self) -> int:
        return len(self.times)


def caloric_pair(v0: VectorField, h0: VectorField, times: np.ndarray) -> CaloricPair:
    """Fill uniform nodes with the heat flow of (v0, h0)."""
    if not v0.grid.compatible(h0.grid):
        raise GridMismatch("v0 and h0 live on different grids")
    times = np.asarray(times, dtype=float)
    _check_times(times)
    t0 = float(times[0])
    v1 = tuple(heat_flow(v0, t - t0) for t in times)
    H1 = tuple(heat_flow(h0, t - t0) for t in times)
    decay = {p: np.array([sp.lp_norm(f, p) for f in v1]) for p in (2, 3, 4, 5)}
    return CaloricPair(v0.grid, sp._freeze(times.copy()), v1, H1, v0, h0, lp_decay=decay)


@dataclass(frozen=True)
class ForcedTrajectory:
    """Time-sampled forcing for the projected heat flow."""

    grid: Grid
    times: np.ndarray
    g: tuple[VectorField, ...]

    @property
    def dt(self) -> float:
        return _check_times(self.times)

    def __len__(self) -> int:
        return len(self.times)


def _phi1(z: np.ndarray) -> np.ndarray:
    zero = z == 0
    zs = np.where(zero, 1.0, z)
    return np.where(zero, 1.0, np.expm1(zs) / zs)


def _phi2(z: np.ndarray) -> np.ndarray:
    # series below |z| = 0.1 avoids the expm1(z) - z cancellation
    small = np.abs(z) < 0.1
    zs = np.where(small, 1.0, z)
    out = (np.expm1(zs) - zs) / zs**2
    series = np.zeros_like(z)
    term = np.full_like(z, 0.5)
    for j in range(3, 11):
        series = series + term
        term = term * z / j
    return np.where(small, series, out)


def duhamel_weights(grid: Grid, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(E, W0, W1): one-step semigroup factor and trapezoid forcing weights."""
    z = -dt * grid.k2
    e = np.exp(z)
    p2 = _phi2(z)
    w0 = dt * (_phi1(z) - p2)
    w1 = dt * p2
    return e, w0, w1


def duhamel(f: ForcedTrajectory) -> tuple[VectorField, ...]:
    """U(t) = int_0^t e^{(t-s) Laplace} P g(s) ds on the trajectory nodes.

    Computed by the incremental semigroup recursion with U(t_0) = 0.
    """
    if len(f) == 0:
        raise EmptyTrajectory("duhamel needs at least one node")
    grid = f.grid
    out = [sp.zero_vector(grid)]
    if len(f) == 1:
        return tuple(out)
    e, w0, w1 = duhamel_weights(grid, f.dt)
    pg_prev = sp._leray_coeff(grid, f.g[0].coeff)
    u = np.zeros((3,) + (grid.n,) * 3, dtype=complex)
    for m in range(1, len(f)):
        pg_next = sp._leray_coeff(grid, f.g[m].coeff)
        u = e * u + w0 * pg_prev + w1 * pg_next
        out.append(VectorField(grid, sp._freeze(u.copy()), solenoidal=True))
        pg_prev = pg_next
    return tuple(out)


def _second_gradient_l_s(u: VectorField, s: float) -> float:
    """L^s norm of the pointwise Frobenius magnitude of the full Hessian of u."""
    g = u.grid
    acc = np.zeros((g.n,) * 3)
    for j in range(3):
        for l in range(j, 3):
            c = -g.k_axis(j) * g.k_axis(l) * u.coeff
            phys = np.real(sp._ifftn(c)) * g.n**3
            w = 1.0 if j == l else 2.0  # off-diagonal partials appear twice
            acc += w * np.sum(phys * phys, axis=0)
    mag = np.sqrt(acc)
    return float((np.sum(mag**s) * g.cell_volume) ** (1.0 / s))


def stokes_solve(
    f: ForcedTrajectory, l: float = 1.5, s: float = 1.125
) -> tuple[tuple[VectorField, ...], tuple[VectorField, ...], float]:
    """Forced Stokes propagator with zero initial data.

    Returns (u, grad p, regularity_ratio): u is the Duhamel flow of P f,
    grad p is (I - P) f per node, and the ratio monitors the maximal
    regularity bound (||d_t u|| + ||grad^2 u|| + ||grad p||)_{L^l L^s}
    against ||f||_{L^l L^s}, with d_t u by centered differences (one-sided
    second-order at the endpoints).
    """
    if len(f) == 0:
        raise EmptyTrajectory("stokes_solve needs at least one node")
    grid = f.grid
    u = duhamel(f)
    gradp = []
    for gm in f.g:
        pg = sp._leray_coeff(grid, gm.coeff)
        gradp.append(VectorField(grid, sp._freeze(gm.coeff - pg)))
    gradp = tuple(gradp)
    if len(f) < 3:
        return u, gradp, 0.0

    dt = f.dt
    dudt = []
    for m in range(len(f)):
        if m == 0:
            c = (-3.0 * u[0].coeff + 4.0 * u[1].coeff - u[2].coeff) / (2 * dt)
        elif m == len(f) - 1:
            c = (3.0 * u[m].coeff - 4.0 * u[m - 1].coeff + u[m - 2].coeff) / (2 * dt)
        else:
            c = (u[m + 1].coeff - u[m - 1].coeff) / (2 * dt)
        dudt.append(VectorField(grid, sp._freeze(c)))

    def _mixed(vals: np.ndarray) -> float:
        return float(np.trapezoid(vals**l, dx=dt) ** (1.0 / l))

    num = (
        _mixed(np.array([sp.lp_norm(g_, s) for g_ in dudt]))
        + _mixed(np.array([_second_gradient_l_s(g_, s) for g_ in u]))
        + _mixed(np.array([sp.lp_norm(g_, s) for g_ in gradp]))
    )
    den = _mixed(np.array([sp.lp_norm(g_, s) for g_ in f.g]))
    ratio = 0.0 if den == 0.0 else num / den
    return u, gradp, ratio
