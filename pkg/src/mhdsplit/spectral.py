"""Periodic-box field algebra.

Scalar, vector, and tensor fields on a uniform n**3 grid over the cube
[0, L)**3 are stored as complex Fourier-series coefficients in numpy FFT
layout, so every differential operator, the divergence-free projection,
mollification, and the heat semigroup are exact diagonal multipliers.
Quadratic terms are formed in physical space and truncated by the 2/3
rule, which keeps products of band-limited fields exact on the retained
modes.

Conventions:
    u(x_j) = sum_m  coeff[m] * exp(i k_m . x_j),  k_m = 2*pi*m / L,
so ``physical = ifftn(coeff) * n**3`` and ``coeff = fftn(values) / n**3``.
Parseval then reads  ||u||_{L2}^2 = L**3 * sum_m |coeff[m]|**2.

All field values are immutable after construction; operations are pure
functions and safe to call concurrently on distinct values.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _sfft

from .errors import EmptyTrajectory, GridMismatch, InvalidGrid

_WORKERS = int(os.environ.get("MHDSPLIT_FFT_WORKERS", "1"))

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "TensorField",
    "make_grid",
    "scalar_from_physical",
    "scalar_from_coeff",
    "vector_from_physical",
    "vector_from_coeff",
    "zero_scalar",
    "zero_vector",
    "gradient",
    "divergence",
    "laplacian",
    "leray_project",
    "mollify",
    "mollifier_multiplier",
    "advect",
    "outer",
    "tensor_divergence",
    "lp_norm",
    "l2_norm",
    "grad_lp_norm",
    "l2_inner",
    "sobolev_seminorm",
    "mixed_norm",
    "mixed_sobolev_norm",
    "xt_norm",
    "random_divfree_field",
    "hermitian_error",
    "solenoidal_error",
    "dealias",
]


def _fftn(a: np.ndarray) -> np.ndarray:
    return _sfft.fftn(a, axes=(-3, -2, -1), workers=_WORKERS)


def _ifftn(a: np.ndarray) -> np.ndarray:
    return _sfft.ifftn(a, axes=(-3, -2, -1), workers=_WORKERS)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


# ============================================================
# Grid
# ============================================================


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform spectral grid on the periodic cube [0, L)**3.

    Wavenumber tables, the squared-wavenumber array, and the 2/3-rule
    dealias mask are derived once at construction.  ``n`` must be even
    and at least 4 so every retained mode has its Hermitian partner.
    """

    n: int
    box_length: float
    k1d: np.ndarray = field(init=False, repr=False, compare=False)
    modes1d: np.ndarray = field(init=False, repr=False, compare=False)
    k2: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n % 2 != 0 or self.n < 4:
            raise InvalidGrid(f"n must be an even integer >= 4, got {self.n!r}")
        if not (float(self.box_length) > 0.0) or not math.isfinite(self.box_length):
            raise InvalidGrid(f"box_length must be positive, got {self.box_length!r}")
        object.__setattr__(self, "box_length", float(self.box_length))
        n = int(self.n)
        object.__setattr__(self, "n", n)
        modes = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        k1d = 2.0 * np.pi * modes / self.box_length
        kx = k1d[:, None, None]
        ky = k1d[None, :, None]
        kz = k1d[None, None, :]
        k2 = kx**2 + ky**2 + kz**2
        cutoff = n // 3
        keep1d = np.abs(modes) <= cutoff
        mask = keep1d[:, None, None] & keep1d[None, :, None] & keep1d[None, None, :]
        object.__setattr__(self, "modes1d", _freeze(modes))
        object.__setattr__(self, "k1d", _freeze(k1d))
        object.__setattr__(self, "k2", _freeze(k2))
        object.__setattr__(self, "dealias_mask", _freeze(mask))

    # Broadcastable wavenumber component along axis i.
    def k_axis(self, i: int) -> np.ndarray:
        shape = [1, 1, 1]
        shape[i] = self.n
        return self.k1d.reshape(shape)

    @property
    def cell_volume(self) -> float:
        return (self.box_length / self.n) ** 3

    @property
    def volume(self) -> float:
        return self.box_length**3

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.arange(self.n) * (self.box_length / self.n)
        return np.meshgrid(x, x, x, indexing="ij")

    def compatible(self, other: "Grid") -> bool:
        return self.n == other.n and self.box_length == other.box_length

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Grid) and self.compatible(other)

    def __hash__(self) -> int:
        return hash((self.n, self.box_length))


def make_grid(n: int, box_length: float) -> Grid:
    """Build a grid; raises InvalidGrid when preconditions fail."""
    return Grid(n, box_length)


def _check_same_grid(*fields) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if not g.compatible(f.grid):
            raise GridMismatch(
                f"grids differ: ({g.n}, {g.box_length}) vs ({f.grid.n}, {f.grid.box_length})"
            )
    return g


# ============================================================
# Fields
# ============================================================


@dataclass(frozen=True)
class ScalarField:
    """Real scalar field stored as complex spectral coefficients."""

    grid: Grid
    coeff: np.ndarray
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    def physical(self) -> np.ndarray:
        return np.real(_ifftn(self.coeff)) * self.grid.n**3

    @property
    def mean(self) -> float:
        return float(self.coeff[0, 0, 0].real)


@dataclass(frozen=True)
class VectorField:
    """Real 3-vector field; ``solenoidal`` asserts spectral divergence-freeness."""

    grid: Grid
    coeff: np.ndarray
    solenoidal: bool = False
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    def physical(self) -> np.ndarray:
        return np.real(_ifftn(self.coeff)) * self.grid.n**3

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return tuple(ScalarField(self.grid, self.coeff[i]) for i in range(3))


@dataclass(frozen=True)
class TensorField:
    """Real 3x3 tensor field, coefficients indexed [i, j, kx, ky, kz]."""

    grid: Grid
    coeff: np.ndarray


def scalar_from_physical(grid: Grid, values: np.ndarray) -> ScalarField:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,) * 3:
        raise GridMismatch(f"expected shape {(grid.n,)*3}, got {values.shape}")
    return ScalarField(grid, _freeze(_fftn(values) / grid.n**3))


def scalar_from_coeff(grid: Grid, coeff: np.ndarray) -> ScalarField:
    coeff = np.asarray(coeff, dtype=complex)
    if coeff.shape != (grid.n,) * 3:
        raise GridMismatch(f"expected shape {(grid.n,)*3}, got {coeff.shape}")
    return ScalarField(grid, _freeze(coeff.copy()))


def vector_from_physical(grid: Grid, values: np.ndarray, solenoidal: bool = False) -> VectorField:
    values = np.asarray(values, dtype=float)
    if values.shape != (3,) + (grid.n,) * 3:
        raise GridMismatch(f"expected shape {(3,) + (grid.n,)*3}, got {values.shape}")
    return VectorField(grid, _freeze(_fftn(values) / grid.n**3), solenoidal=solenoidal)


def vector_from_coeff(
    grid: Grid, coeff: np.ndarray, solenoidal: bool = False, copy: bool = True
) -> VectorField:
    coeff = np.asarray(coeff, dtype=complex)
    if coeff.shape != (3,) + (grid.n,) * 3:
        raise GridMismatch(f"expected shape {(3,) + (grid.n,)*3}, got {coeff.shape}")
    return VectorField(grid, _freeze(coeff.copy() if copy else coeff), solenoidal=solenoidal)


def zero_scalar(grid: Grid) -> ScalarField:
    return ScalarField(grid, _freeze(np.zeros((grid.n,) * 3, dtype=complex)))


def zero_vector(grid: Grid) -> VectorField:
    return VectorField(grid, _freeze(np.zeros((3,) + (grid.n,) * 3, dtype=complex)), solenoidal=True)


def hermitian_error(f: ScalarField | VectorField | TensorField) -> float:
    """Max relative deviation of coeff(-m) from conj(coeff(m))."""
    c = f.coeff
    flipped = np.roll(c[..., ::-1, ::-1, ::-1], shift=1, axis=(-3, -2, -1))
    num = np.max(np.abs(c - np.conj(flipped)))
    den = max(np.max(np.abs(c)), 1e-300)
    return float(num / den)


def solenoidal_error(f: VectorField) -> float:
    """Max per-mode |k . u(k)| / |u(k)| over k != 0.

    Modes below 1e-12 of the peak magnitude are skipped: they carry only
    FFT roundoff, where the per-mode ratio is meaningless noise.
    """
    g = f.grid
    kdotu = np.abs(sum(g.k_axis(i) * f.coeff[i] for i in range(3)))
    mag = np.sqrt(np.sum(np.abs(f.coeff) ** 2, axis=0))
    umax = float(np.max(mag))
    if umax == 0.0:
        return 0.0
    signal = mag > 1e-12 * umax
    signal[0, 0, 0] = False
    if not np.any(signal):
        return 0.0
    return float(np.max(kdotu[signal] / mag[signal]))


def dealias(f: VectorField | ScalarField) -> VectorField | ScalarField:
    mask = f.grid.dealias_mask
    if isinstance(f, VectorField):
        return VectorField(f.grid, _freeze(f.coeff * mask), solenoidal=f.solenoidal)
    return ScalarField(f.grid, _freeze(f.coeff * mask))


# ============================================================
# Differential operators and projections
# ============================================================


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    out = np.empty((3,) + (g.n,) * 3, dtype=complex)
    for i in range(3):
        out[i] = 1j * g.k_axis(i) * f.coeff
    return VectorField(g, _freeze(out))


def divergence(f: VectorField) -> ScalarField:
    g = f.grid
    c = sum(1j * g.k_axis(i) * f.coeff[i] for i in range(3))
    return ScalarField(g, _freeze(c))


def laplacian(f: ScalarField | VectorField) -> ScalarField | VectorField:
    g = f.grid
    c = _freeze(-g.k2 * f.coeff)
    if isinstance(f, VectorField):
        return VectorField(g, c, solenoidal=f.solenoidal)
    return ScalarField(g, c)


def _leray_coeff(grid: Grid, coeff: np.ndarray) -> np.ndarray:
    """Apply delta_ij - k_i k_j / |k|^2 per mode; mode 0 passes through."""
    k2 = np.where(grid.k2 > 0, grid.k2, 1.0)
    kdotu = sum(grid.k_axis(i) * coeff[i] for i in range(3))
    out = np.empty_like(coeff)
    for i in range(3):
        out[i] = coeff[i] - grid.k_axis(i) * kdotu / k2
    # zero mode: k = 0 row of the projector is the identity
    out[:, 0, 0, 0] = coeff[:, 0, 0, 0]
    return out


def leray_project(f: VectorField) -> VectorField:
    """Divergence-free projection, exact per Fourier mode."""
    return VectorField(f.grid, _freeze(_leray_coeff(f.grid, f.coeff)), solenoidal=True)


def mollifier_multiplier(grid: Grid, epsilon: float, kind: str = "gaussian") -> np.ndarray:
    """Positive mollifier symbol evaluated at eps*k, equal to 1 at k = 0.

    ``gaussian`` is exp(-eps^2 |k|^2 / 2).  ``fejer`` is the per-axis
    triangle prod_i max(0, 1 - eps |k_i|); it reaches zero beyond the
    triangle support, unlike the strictly positive default.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if kind == "gaussian":
        return np.exp(-0.5 * epsilon**2 * grid.k2)
    if kind == "fejer":
        m = np.ones((grid.n,) * 3)
        for i in range(3):
            m = m * np.maximum(0.0, 1.0 - epsilon * np.abs(grid.k_axis(i)))
        return m
    raise ValueError(f"unknown mollifier kind {kind!r}")


def mollify(f: VectorField, epsilon: float, kind: str = "gaussian") -> VectorField:
    mult = mollifier_multiplier(f.grid, epsilon, kind)
    return VectorField(f.grid, _freeze(f.coeff * mult), solenoidal=f.solenoidal)


def _grad_physical(f: VectorField) -> np.ndarray:
    """All nine partials, physical space, indexed [i, j] = d_j f_i."""
    g = f.grid
    gc = np.empty((3, 3) + (g.n,) * 3, dtype=complex)
    for i in range(3):
        for j in range(3):
            gc[i, j] = 1j * g.k_axis(j) * f.coeff[i]
    return np.real(_ifftn(gc)) * g.n**3


def advect(u: VectorField, w: VectorField) -> VectorField:
    """(u . grad) w via physical-space products, dealiased by the 2/3 rule."""
    g = _check_same_grid(u, w)
    up = u.physical()
    gw = _grad_physical(w)
    prod = np.einsum("jxyz,ijxyz->ixyz", up, gw)
    out = (_fftn(prod) / g.n**3) * g.dealias_mask
    return VectorField(g, _freeze(out))


def outer(u: VectorField, w: VectorField) -> TensorField:
    """Tensor product T_ij = u_i w_j, dealiased."""
    g = _check_same_grid(u, w)
    up = u.physical()
    wp = w.physical()
    prod = np.einsum("ixyz,jxyz->ijxyz", up, wp)
    out = (_fftn(prod) / g.n**3) * g.dealias_mask
    return TensorField(g, _freeze(out))


def tensor_divergence(t: TensorField) -> VectorField:
    """(div T)_i = d_j T_ji, matching div(u (x) w) = (u . grad) w for div u = 0."""
    g = t.grid
    out = np.zeros((3,) + (g.n,) * 3, dtype=complex)
    for i in range(3):
        for j in range(3):
            out[i] += 1j * g.k_axis(j) * t.coeff[j, i]
    return VectorField(g, _freeze(out))


# ============================================================
# Norms
# ============================================================


def _pointwise_magnitude(f: ScalarField | VectorField) -> np.ndarray:
    if isinstance(f, VectorField):
        p = f.physical()
        return np.sqrt(np.sum(p * p, axis=0))
    return np.abs(f.physical())


def lp_norm(f: ScalarField | VectorField, p: float) -> float:
    """L^p norm by physical-space quadrature; p = inf is the grid max."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    mag = _pointwise_magnitude(f)
    if math.isinf(p):
        return float(np.max(mag))
    return float((np.sum(mag**p) * f.grid.cell_volume) ** (1.0 / p))


def l2_norm(f: ScalarField | VectorField) -> float:
    """Spectral (Parseval) L^2 norm; equals lp_norm(f, 2) for band-limited fields."""
    return float(np.sqrt(f.grid.volume * np.sum(np.abs(f.coeff) ** 2)))


def grad_lp_norm(f: VectorField, p: float) -> float:
    """L^p norm of the pointwise Frobenius magnitude of the Jacobian of f."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    gp = _grad_physical(f)
    mag = np.sqrt(np.einsum("ijxyz,ijxyz->xyz", gp, gp))
    if math.isinf(p):
        return float(np.max(mag))
    return float((np.sum(mag**p) * f.grid.cell_volume) ** (1.0 / p))


def l2_inner(f: ScalarField | VectorField, g: ScalarField | VectorField) -> float:
    _check_same_grid(f, g)
    return float(np.sum(f.physical() * g.physical()) * f.grid.cell_volume)


def sobolev_seminorm(f: ScalarField | VectorField, s: float) -> float:
    """Homogeneous H^s for s in {1, -1} (mode 0 dropped); inhomogeneous for s = -3/2."""
    g = f.grid
    e = np.sum(np.abs(f.coeff) ** 2, axis=0) if isinstance(f, VectorField) else np.abs(f.coeff) ** 2
    if s in (1.0, -1.0, 1, -1):
        k2 = np.where(g.k2 > 0, g.k2, 1.0)
        w = k2**s
        w = np.where(g.k2 > 0, w, 0.0)
        return float(np.sqrt(g.volume * np.sum(w * e)))
    if s == -1.5:
        w = (1.0 + g.k2) ** (-1.5)
        return float(np.sqrt(g.volume * np.sum(w * e)))
    raise ValueError(f"s must be one of 1, -1, -3/2, got {s}")


def mixed_norm(fields, dt: float, l: float, s: float) -> float:
    """L^l-in-time of L^s-in-space over uniform nodes (composite trapezoid)."""
    fields = list(fields)
    if not fields:
        raise EmptyTrajectory("mixed_norm needs at least one node")
    vals = np.array([lp_norm(f, s) for f in fields])
    if math.isinf(l):
        return float(np.max(vals))
    if len(vals) == 1:
        return 0.0
    return float(np.trapezoid(vals**l, dx=dt) ** (1.0 / l))


def mixed_sobolev_norm(fields, dt: float, s: float) -> float:
    """L^2-in-time of the H^s seminorm over uniform nodes."""
    fields = list(fields)
    if not fields:
        raise EmptyTrajectory("mixed_sobolev_norm needs at least one node")
    vals = np.array([sobolev_seminorm(f, s) for f in fields])
    if len(vals) == 1:
        return 0.0
    return float(np.sqrt(np.trapezoid(vals**2, dx=dt)))


def xt_norm(fields, dt: float) -> float:
    """Discrete trajectory norm: max-over-nodes L^2 plus L^2-in-time H^1 seminorm."""
    fields = list(fields)
    if not fields:
        raise EmptyTrajectory("xt_norm needs at least one node")
    l2s = np.array([l2_norm(f) for f in fields])
    return float(np.max(l2s)) + mixed_sobolev_norm(fields, dt, 1.0)


# ============================================================
# Seeded initial data
# ============================================================


def random_divfree_field(
    grid: Grid, seed: int, amplitude: float, decay: float
) -> VectorField:
    """Deterministic solenoidal field with |u(k)| ~ amplitude * |k|^-decay.

    Generator: PCG64(seed) white noise in physical space, transformed,
    shaped by the radial envelope (mode 0 dropped), dealiased, then
    Leray-projected.  The recipe is recorded in the field metadata.
    """
    if not decay > 0:
        raise ValueError(f"decay must be positive, got {decay}")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((3,) + (grid.n,) * 3)
    coeff = _fftn(white) / grid.n**3
    kmag = np.sqrt(grid.k2)
    env = np.zeros_like(kmag)
    nz = kmag > 0
    env[nz] = amplitude * kmag[nz] ** (-decay)
    coeff *= env
    coeff *= grid.dealias_mask
    coeff = _leray_coeff(grid, coeff)
    meta = {
        "generator": "pcg64-white/fft/radial-envelope/leray",
        "seed": int(seed),
        "amplitude": float(amplitude),
        "decay": float(decay),
    }
    return VectorField(grid, _freeze(coeff), solenoidal=True, meta=meta)
