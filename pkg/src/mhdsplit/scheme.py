"""Mollified MHD perturbation system in mild form, solved by certified Picard iteration.

The unknown is the perturbation pair (v2, H2) around the caloric extension
(v1, H1) of the initial data.  On each solve window the mild formulation

    (v2, H2) = B((v2, H2), (v2, H2)) + L((v2, H2)) + R

is assembled with

    B(a, b) = D[ P( -(eta*a_v).grad b_v + (eta*a_H).grad b_H ) ],
              D[ P( -(eta*a_v).grad b_H + (eta*a_H).grad b_v ) ]
    L(a)    = D[ P( -a_v.grad v1 - v1.grad a_v + a_H.grad H1 + H1.grad a_H ) ],
              D[ P( -a_v.grad H1 - v1.grad a_H + a_H.grad v1 + H1.grad a_v ) ]
    R       = D[ P( -v1.grad v1 + H1.grad H1 ) ],
              D[ P( -v1.grad H1 + H1.grad v1 ) ]

where D is the exponential-trapezoid Duhamel integrator, P the
divergence-free projection, and eta* the mollification of the advecting
field.  The contraction constants are estimated from grid-fitted chain
constants (c1 ~ sqrt(T) eps^{-3/2}, c2 ~ fifth-power norms of the caloric
pair), the window is halved until the quadratic fixed-point condition
holds, and the Picard run is certified by the fixed-point module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import calibration
from . import caloric as ca
from . import fixedpoint as fp
from . import spectral as sp
from .caloric import CaloricPair
from .errors import (
    GridMismatch,
    InvalidParams,
    NodeMismatch,
    WindowCollapse,
)
from .spectral import Grid, ScalarField, VectorField

__all__ = [
    "SchemeParams",
    "MhdState",
    "PairSeries",
    "ContractionConstants",
    "Window",
    "Trajectory",
    "assemble_source",
    "bilinear_apply",
    "linear_apply",
    "estimate_constants",
    "solve_window",
    "extend",
    "solve_to_horizon",
    "recover_pressure",
    "pressure_decompose",
    "PressureDecomposition",
    "identity_step_aggregate",
    "energy_identity_residuals",
    "momentum_residual",
    "time_derivative_dual_norm",
]

_SOLENOIDAL_TOL = 1e-8
# caloric physical-space caches beyond this size are recomputed per node
_CACHE_BUDGET_BYTES = int(8e8)


# ============================================================
# Parameters and state containers
# ============================================================


@dataclass(frozen=True)
class SchemeParams:
    """Window-solve parameters.

    ``window_policy`` is "automatic" (start from the requested horizon and
    halve until the contraction condition holds) or "fixed" (start from
    ``window_length``).  ``horizon``/``dt`` must be commensurate.
    """

    epsilon: float
    horizon: float
    dt: float
    picard_tol: float = 1e-10
    max_picard_iters: int = 80
    window_policy: str = "automatic"
    window_length: float | None = None
    mollifier_kind: str = "gaussian"
    dealias: bool = True

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise InvalidParams(f"epsilon must be positive, got {self.epsilon}")
        if not (0 < self.dt < self.horizon):
            raise InvalidParams(f"need 0 < dt < horizon, got dt={self.dt}, horizon={self.horizon}")
        if not self.picard_tol > 0:
            raise InvalidParams(f"picard_tol must be positive, got {self.picard_tol}")
        if self.max_picard_iters < 1:
            raise InvalidParams("max_picard_iters must be at least 1")
        if self.window_policy not in ("automatic", "fixed"):
            raise InvalidParams(f"unknown window_policy {self.window_policy!r}")
        if self.window_policy == "fixed":
            if self.window_length is None or not self.window_length > 0:
                raise InvalidParams("fixed window policy needs a positive window_length")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise InvalidParams(f"horizon {self.horizon} is not a multiple of dt {self.dt}")


@dataclass(frozen=True)
class MhdState:
    """Perturbation pair at one time node; both parts are divergence-free."""

    v2: VectorField
    H2: VectorField
    t: float

    def __post_init__(self) -> None:
        if not (self.v2.solenoidal and self.H2.solenoidal):
            raise InvalidParams("MhdState requires solenoidal fields")


@dataclass(frozen=True)
class PairSeries:
    """Element of the discrete trajectory space: paired node series (v, H).

    Supports +, -, and scalar *, with the norm
    ||(v, H)|| = ||v||_{X} + ||H||_{X},  ||u||_X = max_m ||u(t_m)||_{L2}
    + (trapz ||grad u||_{L2}^2)^{1/2}.
    """

    grid: Grid
    times: np.ndarray
    v: np.ndarray
    H: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid, times: np.ndarray) -> "PairSeries":
        shape = (len(times), 3) + (grid.n,) * 3
        return cls(grid, times, np.zeros(shape, complex), np.zeros(shape, complex))

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def __len__(self) -> int:
        return len(self.times)

    def _like(self, v: np.ndarray, H: np.ndarray) -> "PairSeries":
        return PairSeries(self.grid, self.times, v, H)

    def __add__(self, other: "PairSeries") -> "PairSeries":
        return self._like(self.v + other.v, self.H + other.H)

    def __sub__(self, other: "PairSeries") -> "PairSeries":
        return self._like(self.v - other.v, self.H - other.H)

    def __mul__(self, a: float) -> "PairSeries":
        return self._like(self.v * a, self.H * a)

    __rmul__ = __mul__

    def _xt(self, arr: np.ndarray) -> float:
        vol = self.grid.volume
        e = vol * np.sum(np.abs(arr) ** 2, axis=(1, 2, 3, 4))
        h = vol * np.sum(self.grid.k2 * np.abs(arr) ** 2, axis=(1, 2, 3, 4))
        tail = math.sqrt(float(np.trapezoid(h, dx=self.dt))) if len(self.times) > 1 else 0.0
        return math.sqrt(float(np.max(e))) + tail

    def norm(self) -> float:
        return self._xt(self.v) + self._xt(self.H)

    def v_fields(self) -> tuple[VectorField, ...]:
        return tuple(sp.vector_from_coeff(self.grid, c, solenoidal=True) for c in self.v)

    def H_fields(self) -> tuple[VectorField, ...]:
        return tuple(sp.vector_from_coeff(self.grid, c, solenoidal=True) for c in self.H)


@dataclass(frozen=True)
class ContractionConstants:
    """Estimated Lemma-type constants for one window, plus the chain coefficients."""

    c1: float
    c2: float
    r_norm: float
    c1_coef: float
    c2_coef: float
    epsilon: float
    horizon: float
    calibration_digest: str


@dataclass(frozen=True)
class Window:
    """One solved window: caloric split, perturbation states, and certificate."""

    caloric: CaloricPair
    states: tuple[MhdState, ...]
    certificate: fp.FixedPointCertificate
    constants: ContractionConstants
    params: SchemeParams

    @property
    def grid(self) -> Grid:
        return self.caloric.grid

    @property
    def times(self) -> np.ndarray:
        return self.caloric.times

    @property
    def dt(self) -> float:
        return self.caloric.dt

    @property
    def t0(self) -> float:
        return self.caloric.t0

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def total(self, m: int) -> tuple[VectorField, VectorField]:
        """Full fields v = v1 + v2, H = H1 + H2 at node m."""
        v = sp.vector_from_coeff(
            self.grid, self.caloric.v1[m].coeff + self.states[m].v2.coeff, solenoidal=True
        )
        H = sp.vector_from_coeff(
            self.grid, self.caloric.H1[m].coeff + self.states[m].H2.coeff, solenoidal=True
        )
        return v, H

    def as_series(self) -> PairSeries:
        v = np.array([s.v2.coeff for s in self.states])
        H = np.array([s.H2.coeff for s in self.states])
        return PairSeries(self.grid, self.times, v, H)


@dataclass(frozen=True)
class Trajectory:
    """Solved trajectory: one window per caloric re-split, seam-continuous totals."""

    grid: Grid
    params: SchemeParams
    windows: tuple[Window, ...]

    @property
    def horizon(self) -> float:
        return self.windows[-1].horizon

    @property
    def caloric(self) -> CaloricPair:
        return self.windows[0].caloric

    @property
    def certificates(self) -> tuple[fp.FixedPointCertificate, ...]:
        return tuple(w.certificate for w in self.windows)

    @property
    def initial_data(self) -> tuple[VectorField, VectorField]:
        return self.windows[0].caloric.v0, self.windows[0].caloric.h0

    def nodes(self):
        """Yield (window, node_index, t) over unique nodes (seams reported once)."""
        for wi, w in enumerate(self.windows):
            start = 1 if wi > 0 else 0
            for m in range(start, len(w.times)):
                yield w, m, float(w.times[m])


# ============================================================
# Forcing assembly
# ============================================================


def _project_mask(grid: Grid, coeff: np.ndarray, mask) -> np.ndarray:
    if mask is not None:
        coeff = coeff * mask
    return sp._leray_coeff(grid, coeff)


def _phys(grid: Grid, coeff: np.ndarray) -> np.ndarray:
    return np.real(sp._ifftn(coeff)) * grid.n**3


def _grad_phys(grid: Grid, coeff: np.ndarray) -> np.ndarray:
    gc = np.empty((3, 3) + (grid.n,) * 3, dtype=complex)
    for i in range(3):
        for j in range(3):
            gc[i, j] = 1j * grid.k_axis(j) * coeff[i]
    return np.real(sp._ifftn(gc)) * grid.n**3


def _advect_phys(w: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """(w . grad) target from physical advecting field and physical Jacobian."""
    return np.einsum("jxyz,ijxyz->ixyz", w, grad)


class _CaloricCache:
    """Physical-space caloric fields and Jacobians, cached when they fit in memory."""

    def __init__(self, cal: CaloricPair):
        self.cal = cal
        grid = cal.grid
        nbytes = len(cal) * 2 * 12 * grid.n**3 * 8
        self._full = nbytes <= _CACHE_BUDGET_BYTES
        self.v1p = [_phys(grid, f.coeff) for f in cal.v1]
        self.H1p = [_phys(grid, f.coeff) for f in cal.H1]
        if self._full:
            self.gv1 = [_grad_phys(grid, f.coeff) for f in cal.v1]
            self.gH1 = [_grad_phys(grid, f.coeff) for f in cal.H1]

    def grads(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        if self._full:
            return self.gv1[m], self.gH1[m]
        grid = self.cal.grid
        return _grad_phys(grid, self.cal.v1[m].coeff), _grad_phys(grid, self.cal.H1[m].coeff)


class _MildOperator:
    """Evaluates the Duhamel images of the bilinear, linear, source, and full forcings."""

    def __init__(self, cal: CaloricPair, params: SchemeParams):
        self.cal = cal
        self.params = params
        self.grid = cal.grid
        self.mask = self.grid.dealias_mask if params.dealias else None
        self.moll = sp.mollifier_multiplier(self.grid, params.epsilon, params.mollifier_kind)
        self.cache = _CaloricCache(cal)

    def _to_forcing(self, acc_v: np.ndarray, acc_H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grid = self.grid
        gv = _project_mask(grid, sp._fftn(acc_v) / grid.n**3, self.mask)
        gH = _project_mask(grid, sp._fftn(acc_H) / grid.n**3, self.mask)
        return gv, gH

    def forcing_full(self, m: int, v2c: np.ndarray, H2c: np.ndarray):
        """Complete mollified-system forcing at node m for iterate coefficients."""
        grid = self.grid
        v2p = _phys(grid, v2c)
        H2p = _phys(grid, H2c)
        wv = _phys(grid, self.moll * v2c) + self.cache.v1p[m]
        wH = _phys(grid, self.moll * H2c) + self.cache.H1p[m]
        gv2 = _grad_phys(grid, v2c)
        gH2 = _grad_phys(grid, H2c)
        gv1, gH1 = self.cache.grads(m)
        acc_v = (
            -_advect_phys(wv, gv2)
            - _advect_phys(v2p + self.cache.v1p[m], gv1)
            + _advect_phys(wH, gH2)
            + _advect_phys(H2p + self.cache.H1p[m], gH1)
        )
        acc_H = (
            -_advect_phys(wv, gH2)
            - _advect_phys(v2p + self.cache.v1p[m], gH1)
            + _advect_phys(wH, gv2)
            + _advect_phys(H2p + self.cache.H1p[m], gv1)
        )
        return self._to_forcing(acc_v, acc_H)

    def forcing_bilinear(self, m: int, avc, aHc, bvc, bHc):
        grid = self.grid
        mv = _phys(grid, self.moll * avc)
        mH = _phys(grid, self.moll * aHc)
        gbv = _grad_phys(grid, bvc)
        gbH = _grad_phys(grid, bHc)
        acc_v = -_advect_phys(mv, gbv) + _advect_phys(mH, gbH)
        acc_H = -_advect_phys(mv, gbH) + _advect_phys(mH, gbv)
        return self._to_forcing(acc_v, acc_H)

    def forcing_linear(self, m: int, avc, aHc):
        grid = self.grid
        avp = _phys(grid, avc)
        aHp = _phys(grid, aHc)
        gav = _grad_phys(grid, avc)
        gaH = _grad_phys(grid, aHc)
        gv1, gH1 = self.cache.grads(m)
        acc_v = (
            -_advect_phys(avp, gv1)
            - _advect_phys(self.cache.v1p[m], gav)
            + _advect_phys(aHp, gH1)
            + _advect_phys(self.cache.H1p[m], gaH)
        )
        acc_H = (
            -_advect_phys(avp, gH1)
            - _advect_phys(self.cache.v1p[m], gaH)
            + _advect_phys(aHp, gv1)
            + _advect_phys(self.cache.H1p[m], gav)
        )
        return self._to_forcing(acc_v, acc_H)

    def forcing_source(self, m: int):
        gv1, gH1 = self.cache.grads(m)
        acc_v = -_advect_phys(self.cache.v1p[m], gv1) + _advect_phys(self.cache.H1p[m], gH1)
        acc_H = -_advect_phys(self.cache.v1p[m], gH1) + _advect_phys(self.cache.H1p[m], gv1)
        return self._to_forcing(acc_v, acc_H)

    def _duhamel_series(self, forcing) -> PairSeries:
        """Run the semigroup recursion over projected forcings g(m) = forcing(m)."""
        grid = self.grid
        times = self.cal.times
        M = len(times)
        shape = (M, 3) + (grid.n,) * 3
        out_v = np.zeros(shape, complex)
        out_H = np.zeros(shape, complex)
        if M > 1:
            e, w0, w1 = ca.duhamel_weights(grid, self.cal.dt)
            gv_prev, gH_prev = forcing(0)
            uv = np.zeros(shape[1:], complex)
            uH = np.zeros(shape[1:], complex)
            for m in range(1, M):
                gv_next, gH_next = forcing(m)
                uv = e * uv + w0 * gv_prev + w1 * gv_next
                uH = e * uH + w0 * gH_prev + w1 * gH_next
                out_v[m] = uv
                out_H[m] = uH
                gv_prev, gH_prev = gv_next, gH_next
        return PairSeries(grid, times, out_v, out_H)

    def bilinear(self, a: PairSeries, b: PairSeries) -> PairSeries:
        return self._duhamel_series(lambda m: self.forcing_bilinear(m, a.v[m], a.H[m], b.v[m], b.H[m]))

    def linear(self, a: PairSeries) -> PairSeries:
        return self._duhamel_series(lambda m: self.forcing_linear(m, a.v[m], a.H[m]))

    def source(self) -> PairSeries:
        return self._duhamel_series(self.forcing_source)

    def full(self, a: PairSeries) -> PairSeries:
        return self._duhamel_series(lambda m: self.forcing_full(m, a.v[m], a.H[m]))


def _check_series_compat(cal: CaloricPair, *series: PairSeries) -> None:
    for s in series:
        if not s.grid.compatible(cal.grid):
            raise GridMismatch("series grid differs from caloric grid")
        if len(s.times) != len(cal.times) or not np.allclose(s.times, cal.times, atol=1e-12):
            raise NodeMismatch("series nodes differ from caloric nodes")


def assemble_source(cal: CaloricPair, params: SchemeParams | None = None) -> PairSeries:
    """Duhamel image of the caloric self-interaction (the fixed-point source R)."""
    op = _MildOperator(cal, params or _default_params(cal))
    return op.source()


def bilinear_apply(cal: CaloricPair, a: PairSeries, b: PairSeries, params: SchemeParams) -> PairSeries:
    """Duhamel image of the mollified-advection bilinear coupling of (a, b)."""
    _check_series_compat(cal, a, b)
    return _MildOperator(cal, params).bilinear(a, b)


def linear_apply(cal: CaloricPair, a: PairSeries, params: SchemeParams | None = None) -> PairSeries:
    """Duhamel image of the eight caloric cross terms applied to a."""
    _check_series_compat(cal, a)
    return _MildOperator(cal, params or _default_params(cal)).linear(a)


def _default_params(cal: CaloricPair) -> SchemeParams:
    dt = cal.dt if len(cal) > 1 else 1.0
    horizon = max(float(cal.times[-1] - cal.times[0]), 2 * dt)
    return SchemeParams(epsilon=1.0, horizon=horizon, dt=dt)


# ============================================================
# Constants, window solve, continuation
# ============================================================


def _estimate(cal: CaloricPair, params: SchemeParams) -> tuple[ContractionConstants, PairSeries]:
    consts = calibration.grid_constants(cal.grid, params.mollifier_kind)
    horizon = float(cal.times[-1] - cal.times[0])
    dt = cal.dt
    c1 = consts.c1_coef * math.sqrt(horizon) * params.epsilon**-1.5
    l5 = sp.mixed_norm(cal.v1, dt, 5.0, 5.0) + sp.mixed_norm(cal.H1, dt, 5.0, 5.0)
    c2 = consts.c2_coef * l5
    source = assemble_source(cal, params)
    r_norm = source.norm()
    constants = ContractionConstants(
        c1=c1,
        c2=c2,
        r_norm=r_norm,
        c1_coef=consts.c1_coef,
        c2_coef=consts.c2_coef,
        epsilon=params.epsilon,
        horizon=horizon,
        calibration_digest=consts.digest(),
    )
    return constants, source


def estimate_constants(cal: CaloricPair, params: SchemeParams) -> ContractionConstants:
    """Contraction constants c1 = C sqrt(T) eps^{-3/2}, c2 = C' (L5L5 caloric norms),
    and r_norm as the trajectory norm of the assembled source."""
    return _estimate(cal, params)[0]


def _require_solenoidal(v0: VectorField, h0: VectorField) -> None:
    if not v0.grid.compatible(h0.grid):
        raise GridMismatch("v0 and h0 live on different grids")
    for name, f in (("v0", v0), ("h0", h0)):
        # field-scale divergence measure: per-mode ratios are meaningless on
        # roundoff-level modes of otherwise projected data
        div = sp.l2_norm(sp.divergence(f))
        scale = sp.sobolev_seminorm(f, 1.0)
        if div > _SOLENOIDAL_TOL * max(scale, 1e-300):
            raise InvalidParams(f"{name} is not solenoidal (relative divergence {div / scale:.3g})")


def _probe_series(grid: Grid, times: np.ndarray, seed: int) -> PairSeries:
    fv = sp.random_divfree_field(grid, seed=seed, amplitude=1.0, decay=1.5)
    fH = sp.random_divfree_field(grid, seed=seed + 1, amplitude=0.8, decay=2.0)
    t0 = float(times[0])
    v = np.array([ca.heat_flow(fv, float(t) - t0).coeff for t in times])
    H = np.array([ca.heat_flow(fH, float(t) - t0).coeff for t in times])
    return PairSeries(grid, times, v, H)


def solve_window(
    v0: VectorField,
    h0: VectorField,
    params: SchemeParams,
    t_start: float = 0.0,
    probe_seed: int = 90_210,
) -> Trajectory:
    """Solve one window, shrinking it until the contraction condition holds.

    The returned trajectory has a single window whose certificate records
    the Picard run; its first state is exactly zero.
    """
    _require_solenoidal(v0, h0)
    grid = v0.grid
    dt = params.dt
    target = params.horizon
    if params.window_policy == "fixed":
        target = min(params.window_length, params.horizon)
    steps = int(round(target / dt))
    if abs(steps * dt - target) > 1e-9 * max(1.0, target):
        raise InvalidParams(f"window {target} is not a multiple of dt {dt}")

    while True:
        if steps < 2:
            raise WindowCollapse(
                f"no window of at least 2*dt={2 * dt:.3g} satisfies the contraction condition"
            )
        times = t_start + dt * np.arange(steps + 1)
        cal = ca.caloric_pair(v0, h0, times)
        constants, source = _estimate(cal, params)
        if constants.c2 < 1.0:
            ok, _, _ = fp.check_condition(constants.c1, constants.c2, constants.r_norm)
            if ok:
                break
        steps //= 2

    op = _MildOperator(cal, params)
    probes = (source, _probe_series(grid, times, probe_seed))
    problem = fp.QuadraticProblem(
        bilinear=op.bilinear,
        linear=op.linear,
        source=source,
        zero=PairSeries.zeros(grid, times),
        norm=PairSeries.norm,
        c1=constants.c1,
        c2=constants.c2,
        r_norm=constants.r_norm,
        probes=probes,
        combined=op.full,
    )
    solution, cert = fp.solve(problem, tol=params.picard_tol, max_iter=params.max_picard_iters)
    states = tuple(
        MhdState(
            v2=sp.vector_from_coeff(grid, solution.v[m], solenoidal=True),
            H2=sp.vector_from_coeff(grid, solution.H[m], solenoidal=True),
            t=float(times[m]),
        )
        for m in range(len(times))
    )
    window = Window(caloric=cal, states=states, certificate=cert, constants=constants, params=params)
    return Trajectory(grid=grid, params=params, windows=(window,))


def extend(traj: Trajectory, new_horizon: float, probe_seed: int = 90_210) -> Trajectory:
    """Continue past the attained horizon by re-splitting at each window end.

    The total fields at the seam become fresh initial data, so the
    concatenated totals are continuous by construction.
    """
    tiny = 1e-9 * max(1.0, abs(new_horizon))
    if new_horizon < traj.horizon - tiny:
        raise InvalidParams(
            f"new horizon {new_horizon} is before the attained horizon {traj.horizon}"
        )
    if new_horizon <= traj.horizon + tiny:
        return traj
    windows = list(traj.windows)
    while windows[-1].horizon < new_horizon - tiny:
        last = windows[-1]
        v_end, h_end = last.total(len(last.times) - 1)
        remaining = new_horizon - last.horizon
        steps = int(round(remaining / traj.params.dt))
        sub_params = replace(traj.params, horizon=steps * traj.params.dt)
        sub = solve_window(v_end, h_end, sub_params, t_start=last.horizon, probe_seed=probe_seed)
        windows.append(sub.windows[0])
    return Trajectory(grid=traj.grid, params=traj.params, windows=tuple(windows))


def solve_to_horizon(
    v0: VectorField, h0: VectorField, params: SchemeParams, probe_seed: int = 90_210
) -> Trajectory:
    """solve_window followed by continuation until params.horizon is covered."""
    traj = solve_window(v0, h0, params, probe_seed=probe_seed)
    return extend(traj, params.horizon, probe_seed=probe_seed)


# ============================================================
# Pressure recovery and decomposition
# ============================================================


def _pressure_from_outer(
    grid: Grid, first: np.ndarray, second: np.ndarray, first_h: np.ndarray, second_h: np.ndarray, mask
) -> np.ndarray:
    """Solve laplace Pi = -d_i d_j N_ij with N = first (x) second - first_h (x) second_h."""
    n_phys = np.einsum("ixyz,jxyz->ijxyz", first, second) - np.einsum(
        "ixyz,jxyz->ijxyz", first_h, second_h
    )
    n_hat = sp._fftn(n_phys) / grid.n**3
    if mask is not None:
        n_hat = n_hat * mask
    kk = np.zeros((grid.n,) * 3, complex)
    for i in range(3):
        for j in range(3):
            kk = kk + grid.k_axis(i) * grid.k_axis(j) * n_hat[i, j]
    k2 = np.where(grid.k2 > 0, grid.k2, 1.0)
    pi = -kk / k2
    pi[0, 0, 0] = 0.0
    return pi


def recover_pressure(
    state: MhdState, cal: CaloricPair, mollified_params: SchemeParams | None = None
) -> ScalarField:
    """Pressure of the full fields at the state's time via the spectral div-div solve.

    With ``mollified_params`` the advecting factors of the perturbation
    blocks are mollified, matching the approximate system's own pressure;
    by default the plain fields v = v1 + v2, H = H1 + H2 are used.
    """
    grid = cal.grid
    idx = np.nonzero(np.abs(cal.times - state.t) <= 1e-9 * max(1.0, abs(state.t)))[0]
    if idx.size == 0:
        raise NodeMismatch(f"time {state.t} is not a caloric node")
    m = int(idx[0])
    if not grid.compatible(state.v2.grid):
        raise GridMismatch("state and caloric grids differ")
    mask = grid.dealias_mask
    v1c, H1c = cal.v1[m].coeff, cal.H1[m].coeff
    vc = v1c + state.v2.coeff
    Hc = H1c + state.H2.coeff
    if mollified_params is None:
        first_v = _phys(grid, vc)
        first_H = _phys(grid, Hc)
    else:
        moll = sp.mollifier_multiplier(grid, mollified_params.epsilon, mollified_params.mollifier_kind)
        first_v = _phys(grid, moll * state.v2.coeff + v1c)
        first_H = _phys(grid, moll * state.H2.coeff + H1c)
    pi = _pressure_from_outer(grid, first_v, _phys(grid, vc), first_H, _phys(grid, Hc), mask)
    return ScalarField(grid, sp._freeze(pi))


def _pressure_potential(grid: Grid, f_coeff: np.ndarray) -> np.ndarray:
    """Scalar p with grad p = (I - P) f: p / i = -(k . f) / |k|^2, zero mode 0."""
    kdotf = sum(grid.k_axis(i) * f_coeff[i] for i in range(3))
    k2 = np.where(grid.k2 > 0, grid.k2, 1.0)
    p = -1j * kdotf / k2
    p[0, 0, 0] = 0.0
    return p


_PART_FORCINGS = ("H2.H2-v2.v2", "H2.H1-v2.v1", "H1.H2-v1.v2", "H1.H1-v1.v1")


@dataclass(frozen=True)
class PressureDecomposition:
    """Four-part pressure split with per-part Stokes regularity ratios."""

    times: np.ndarray
    parts: tuple  # four tuples of ScalarField per node
    regularity: dict  # part index -> {"pair": (l, s), "ratio": float}
    sum_vs_total: float  # relative mixed-norm gap between grad Pi and sum of part gradients
    labels: tuple = _PART_FORCINGS


def pressure_decompose(traj: Trajectory) -> PressureDecomposition:
    """Split the pressure along the four advection blocks via forced Stokes solves.

    Parts are ordered (perturbation-perturbation, perturbation-caloric,
    caloric-perturbation, caloric-caloric); part i reports the Solonnikov
    ratio at its exponent pair from the pressure analysis.
    """
    grid = traj.grid
    pairs = ca.SOLONNIKOV_PAIRS
    all_times: list[np.ndarray] = []
    parts_nodes: list[list[ScalarField]] = [[], [], [], []]
    ratios: dict[int, dict] = {}
    gap_num = 0.0
    gap_den = 0.0
    for w in traj.windows:
        v1 = w.caloric.v1
        H1 = w.caloric.H1
        v2 = [s.v2 for s in w.states]
        H2 = [s.H2 for s in w.states]
        forcing_defs = (
            lambda m: (H2[m], H2[m], v2[m], v2[m]),
            lambda m: (H2[m], H1[m], v2[m], v1[m]),
            lambda m: (H1[m], H2[m], v1[m], v2[m]),
            lambda m: (H1[m], H1[m], v1[m], v1[m]),
        )
        window_parts = []
        for part, mkdef in enumerate(forcing_defs):
            fields = []
            for m in range(len(w.times)):
                a, b, c, d = mkdef(m)
                f = sp.advect(a, b).coeff - sp.advect(c, d).coeff
                fields.append(sp.vector_from_coeff(grid, f, copy=False))
            ft = ca.ForcedTrajectory(grid, w.times, tuple(fields))
            l, s = pairs[part]
            _, gradp, ratio = ca.stokes_solve(ft, l=l, s=s)
            prev = ratios.get(part)
            ratios[part] = {"pair": (l, s), "ratio": max(ratio, prev["ratio"]) if prev else ratio}
            pis = [ScalarField(grid, sp._freeze(_pressure_potential(grid, f.coeff))) for f in ft.g]
            window_parts.append(pis)
            parts_nodes[part].extend(pis)
        # consistency: sum of part gradients vs gradient of the recovered pressure
        for m in range(len(w.times)):
            total = recover_pressure(w.states[m], w.caloric)
            gsum = sum(
                1j * np.stack([grid.k_axis(i) * window_parts[p][m].coeff for i in range(3)])
                for p in range(4)
            )
            gtot = 1j * np.stack([grid.k_axis(i) * total.coeff for i in range(3)])
            gap_num += float(np.sum(np.abs(gsum - gtot) ** 2))
            gap_den += float(np.sum(np.abs(gtot) ** 2))
        all_times.append(w.times)
    rel = math.sqrt(gap_num / gap_den) if gap_den > 0 else 0.0
    return PressureDecomposition(
        times=np.concatenate(all_times),
        parts=tuple(tuple(p) for p in parts_nodes),
        regularity=ratios,
        sum_vs_total=rel,
    )


# ============================================================
# Diagnostics: energy identity, momentum residual, dual norm
# ============================================================


def _cross_production(grid: Grid, v1c, H1c, v2c, H2c) -> float:
    """Tensor form of the energy cross terms: sum a_i b_j d_j c_i integrated."""
    v1p = _phys(grid, v1c)
    H1p = _phys(grid, H1c)
    vp = v1p + _phys(grid, v2c)
    Hp = H1p + _phys(grid, H2c)
    gv2 = _grad_phys(grid, v2c)
    gH2 = _grad_phys(grid, H2c)
    w = grid.cell_volume
    s = np.einsum("ixyz,jxyz,ijxyz->", v1p, vp, gv2)
    s -= np.einsum("ixyz,jxyz,ijxyz->", H1p, Hp, gv2)
    s -= np.einsum("ixyz,jxyz,ijxyz->", v1p, Hp, gH2)
    s += np.einsum("ixyz,jxyz,ijxyz->", H1p, vp, gH2)
    return float(s) * w


def identity_step_aggregate(E: np.ndarray, D: np.ndarray, S: np.ndarray, dt: float) -> np.ndarray:
    """Per-step dt^2 error aggregate for the discrete energy balance.

    Combines the term magnitudes with a-posteriori curvature estimates of
    the midpoint/trapezoid defects: |avg f - f(mid)| <= |d2 f| / 8 and
    |dE/dt(discrete) - E'(mid)| <= |d3 E| / (24 dt), expressed per dt^2.
    """
    M = len(E)
    steps = M - 1
    agg = np.empty(steps)
    for m in range(steps):
        base = abs(E[m + 1] - E[m]) / dt + 0.5 * (D[m] + D[m + 1]) + 0.5 * abs(S[m] + S[m + 1])
        lo = max(0, min(m, M - 3))
        d2D = abs(D[lo + 2] - 2 * D[lo + 1] + D[lo]) if M >= 3 else 0.0
        d2S = abs(S[lo + 2] - 2 * S[lo + 1] + S[lo]) if M >= 3 else 0.0
        lo3 = max(0, min(m, M - 4))
        d3E = abs(E[lo3 + 3] - 3 * E[lo3 + 2] + 3 * E[lo3 + 1] - E[lo3]) if M >= 4 else 0.0
        agg[m] = base + (d2D + d2S) / (8.0 * dt**2) + d3E / (24.0 * dt**3)
    return agg


def energy_identity_residuals(traj: Trajectory) -> dict:
    """Per-step defect of the discrete energy balance of the mollified system.

    residual[m] = (E(t_{m+1}) - E(t_m))/dt + avg Dissipation - avg CrossTerms
    with E = (||v2||^2 + ||H2||^2)/2 and Dissipation = ||grad v2||^2 +
    ||grad H2||^2, evaluated per window.  Also returns the dt^2-matched
    tolerance profile 10 * (dt^2 * aggregate + 1e-12).
    """
    residuals = []
    tolerances = []
    for w in traj.windows:
        dt = w.dt
        M = len(w.times)
        E = np.empty(M)
        D = np.empty(M)
        S = np.empty(M)
        for m in range(M):
            v2, H2 = w.states[m].v2, w.states[m].H2
            E[m] = 0.5 * (sp.l2_norm(v2) ** 2 + sp.l2_norm(H2) ** 2)
            D[m] = sp.sobolev_seminorm(v2, 1.0) ** 2 + sp.sobolev_seminorm(H2, 1.0) ** 2
            S[m] = _cross_production(
                w.grid, w.caloric.v1[m].coeff, w.caloric.H1[m].coeff, v2.coeff, H2.coeff
            )
        agg = identity_step_aggregate(E, D, S, dt)
        for m in range(M - 1):
            residuals.append((E[m + 1] - E[m]) / dt + 0.5 * (D[m] + D[m + 1]) - 0.5 * (S[m] + S[m + 1]))
            tolerances.append(10.0 * (dt**2 * agg[m] + 1e-12))
    return {
        "residuals": np.array(residuals),
        "tolerances": np.array(tolerances),
        "max_residual": float(np.max(np.abs(residuals))) if residuals else 0.0,
    }


def momentum_residual(traj: Trajectory) -> float:
    """Max interior-node L2 residual of the discrete momentum/induction system.

    Checks d_t (v2, H2) (centered) - Laplacian (v2, H2) - P g against zero,
    where g is the mollified-system forcing; O(dt^2) on a converged run.
    """
    worst = 0.0
    for w in traj.windows:
        op = _MildOperator(w.caloric, w.params)
        dt = w.dt
        grid = w.grid
        for m in range(1, len(w.times) - 1):
            gv, gH = op.forcing_full(m, w.states[m].v2.coeff, w.states[m].H2.coeff)
            for comp, g in (("v2", gv), ("H2", gH)):
                prev = getattr(w.states[m - 1], comp).coeff
                cur = getattr(w.states[m], comp).coeff
                nxt = getattr(w.states[m + 1], comp).coeff
                res = (nxt - prev) / (2 * dt) + grid.k2 * cur - g
                worst = max(worst, float(np.sqrt(grid.volume * np.sum(np.abs(res) ** 2))))
    return worst


def time_derivative_dual_norm(traj: Trajectory) -> float:
    """L2-in-time of the H^{-3/2} norm of the discrete time derivative of (v2, H2)."""
    total_sq = 0.0
    for w in traj.windows:
        dt = w.dt
        grid = w.grid
        if len(w.times) < 3:
            continue
        vals = []
        for m in range(len(w.times)):
            if m == 0:
                dv = (-3 * w.states[0].v2.coeff + 4 * w.states[1].v2.coeff - w.states[2].v2.coeff) / (2 * dt)
                dH = (-3 * w.states[0].H2.coeff + 4 * w.states[1].H2.coeff - w.states[2].H2.coeff) / (2 * dt)
            elif m == len(w.times) - 1:
                dv = (3 * w.states[m].v2.coeff - 4 * w.states[m - 1].v2.coeff + w.states[m - 2].v2.coeff) / (2 * dt)
                dH = (3 * w.states[m].H2.coeff - 4 * w.states[m - 1].H2.coeff + w.states[m - 2].H2.coeff) / (2 * dt)
            else:
                dv = (w.states[m + 1].v2.coeff - w.states[m - 1].v2.coeff) / (2 * dt)
                dH = (w.states[m + 1].H2.coeff - w.states[m - 1].H2.coeff) / (2 * dt)
            wgt = (1.0 + grid.k2) ** -1.5
            sq = grid.volume * float(np.sum(wgt * (np.abs(dv) ** 2 + np.abs(dH) ** 2)))
            vals.append(sq)
        total_sq += float(np.trapezoid(np.array(vals), dx=dt))
    return math.sqrt(total_sq)
