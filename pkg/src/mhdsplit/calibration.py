"""Grid-fitted constants for inequality audits and contraction estimates.

Several inequalities used by the solver and the audit harness carry
constants that are existential in the underlying estimates (interpolation,
heat-kernel decay, mean-oscillation bounds, the nonlinear-term bound).
They are fitted once per grid on a frozen, seeded calibration corpus of
synthetic fields and trajectories, padded by a fixed safety margin, and
versioned: precomputed tables for the standard grids ship with the
package (``data/calibration.json``) and are regenerated with
``python -m mhdsplit.calibration --write``.  Everything is deterministic,
so a missing table entry is recomputed on the fly with identical values.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import caloric as ca
from . import spectral as sp
from .spectral import Grid

__all__ = ["GridConstants", "grid_constants", "compute_constants", "pair_key"]

_DATA_PATH = Path(__file__).parent / "data" / "calibration.json"

# Lemma-2.5-type discrete Duhamel constant: proof constants 1/sqrt(2) and 1
# for the two trajectory-norm parts, with a 5% quadrature margin.
DUHAMEL_CONSTANT = 1.05 * (1.0 / math.sqrt(2.0) + 1.0)

# Mollification scales spanned by the contraction-coefficient fit.
_EPSILON_RANGE = (1.0, 0.5, 0.25, 0.125)

# (l, s) exponent pairs on the nonlinear-bound scaling line 3/s + 2/l = 4.
SCALING_PAIRS = ((1.5, 1.125), (2.0, 1.0), (1.0, 1.5), (4.0 / 3.0, 1.2))

# Mean-oscillation exponent families per pressure part:
# (R-power, inner space exponent, outer time power).
OSCILLATION_FAMILIES = (
    (0.5, 1.125, 4.0 / 3.0),
    (1.125, 4.0 / 3.0, 1.125),
    (0.75, 1.2, 1.25),
    (1.5, 1.5, 1.0),
)


def pair_key(l: float, s: float) -> str:
    return f"{l:.6g}:{s:.6g}"


@dataclass(frozen=True)
class GridConstants:
    """Fitted constants for one (n, box_length, mollifier kind) triple."""

    n: int
    box_length: float
    mollifier_kind: str
    interp_10_3: float
    heat_grad_decay: float
    duhamel: float
    c1_coef: float
    c2_coef: float
    nonlinear: dict
    caloric_linf_l3: float
    caloric_l5l5: float
    caloric_l8l4: float
    l3_attain: float
    oscillation: tuple

    def to_jsonable(self) -> dict:
        d = asdict(self)
        d["oscillation"] = list(self.oscillation)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_jsonable(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _random_scalar(grid: Grid, seed: int, decay: float) -> sp.ScalarField:
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((grid.n,) * 3)
    coeff = sp._fftn(white) / grid.n**3
    kmag = np.sqrt(grid.k2)
    env = np.zeros_like(kmag)
    env[kmag > 0] = kmag[kmag > 0] ** (-decay)
    coeff = coeff * env * grid.dealias_mask
    return sp.ScalarField(grid, sp._freeze(coeff))


def _fit_interpolation(grid: Grid) -> float:
    ratios = []
    for i in range(100):
        f = sp.random_divfree_field(grid, seed=11_000 + i, amplitude=1.0, decay=1.0 + 0.5 * (i % 5))
        denom = sp.lp_norm(f, 2.0) ** 0.4 * sp.sobolev_seminorm(f, 1.0) ** 0.6
        if denom > 0:
            ratios.append(sp.lp_norm(f, 10.0 / 3.0) / denom)
    return 1.05 * max(ratios)


def _fit_heat_decay(grid: Grid) -> float:
    worst = 0.0
    times = np.geomspace(0.01, 1.0, 7)
    for i in range(5):
        v0 = sp.random_divfree_field(grid, seed=12_000 + i, amplitude=1.0, decay=1.5)
        l3 = sp.lp_norm(v0, 3.0)
        for t in times:
            u = ca.heat_flow(v0, float(t))
            worst = max(worst, t**0.625 * sp.grad_lp_norm(u, 4.0) / l3)
    return 1.1 * worst


def _mollifier_linf_factor(grid: Grid, epsilon: float, kind: str) -> float:
    """Sharp L^2 -> L^inf operator factor of the mollifier on the dealiased band."""
    mult = sp.mollifier_multiplier(grid, epsilon, kind)
    s = float(np.sum((mult * grid.dealias_mask) ** 2))
    return math.sqrt(s) / grid.box_length**1.5


def _fit_c1_coef(grid: Grid, kind: str) -> float:
    worst = max(e**1.5 * _mollifier_linf_factor(grid, e, kind) for e in _EPSILON_RANGE)
    return 1.1 * DUHAMEL_CONSTANT * worst


def _fit_nonlinear(grid: Grid) -> dict:
    times = np.linspace(0.0, 0.5, 9)
    dt = float(times[1])
    out: dict[str, float] = {}
    corpus = []
    for i in range(5):
        f = sp.random_divfree_field(grid, seed=13_000 + i, amplitude=1.0, decay=1.5 + 0.25 * i)
        fields = [ca.heat_flow(f, float(t)) for t in times]
        adv = [sp.advect(u, u) for u in fields]
        denom = max(sp.l2_norm(u) for u in fields) + sp.mixed_sobolev_norm(fields, dt, 1.0)
        corpus.append((adv, denom))
    for l, s in SCALING_PAIRS:
        worst = max(sp.mixed_norm(adv, dt, l, s) / denom for adv, denom in corpus)
        out[pair_key(l, s)] = 1.25 * worst
    out["default"] = 1.2 * max(v for v in out.values())
    return out


def _fit_caloric(grid: Grid) -> tuple[float, float, float]:
    times = np.linspace(0.0, 4.0, 33)
    dt = float(times[1])
    worst = [0.0, 0.0, 0.0]
    for i in range(5):
        v0 = sp.random_divfree_field(grid, seed=14_000 + i, amplitude=1.0, decay=2.0)
        h0 = sp.random_divfree_field(grid, seed=14_500 + i, amplitude=0.7, decay=1.75)
        pair = ca.caloric_pair(v0, h0, times)
        base = sp.lp_norm(v0, 3.0) + sp.lp_norm(h0, 3.0)
        linf_l3 = sp.mixed_norm(pair.v1, dt, math.inf, 3.0) + sp.mixed_norm(pair.H1, dt, math.inf, 3.0)
        l5l5 = sp.mixed_norm(pair.v1, dt, 5.0, 5.0) + sp.mixed_norm(pair.H1, dt, 5.0, 5.0)
        l8l4 = sp.mixed_norm(pair.v1, dt, 8.0, 4.0) + sp.mixed_norm(pair.H1, dt, 8.0, 4.0)
        worst[0] = max(worst[0], linf_l3 / base)
        worst[1] = max(worst[1], l5l5 / base)
        worst[2] = max(worst[2], l8l4 / base)
    return 1.25 * worst[0], 1.25 * worst[1], 1.25 * worst[2]


def _fit_oscillation(grid: Grid) -> tuple:
    from .verify import oscillation_sides  # deferred: verify imports this module

    times = np.array([0.0, 0.1, 0.2])
    dt = float(times[1])
    worst = [0.0] * len(OSCILLATION_FAMILIES)
    radii = [grid.box_length / 8.0, grid.box_length / 4.0, grid.box_length / 2.0]
    for i in range(5):
        base = _random_scalar(grid, seed=15_000 + i, decay=2.5)
        fields = [sp.ScalarField(grid, sp._freeze(a * base.coeff)) for a in (1.0, 0.8, 0.5)]
        for fam, (alpha, p, q) in enumerate(OSCILLATION_FAMILIES):
            for r in radii:
                left, right, _ = oscillation_sides(fields, dt, r, alpha, p, q)
                if right > 0:
                    worst[fam] = max(worst[fam], left / right)
    return tuple(2.0 * w for w in worst)


def compute_constants(grid: Grid, mollifier_kind: str = "gaussian") -> GridConstants:
    """Fit every constant on the frozen corpus for this grid (deterministic)."""
    lo, hi, l84 = _fit_caloric(grid)
    interp = _fit_interpolation(grid)
    return GridConstants(
        n=grid.n,
        box_length=grid.box_length,
        mollifier_kind=mollifier_kind,
        interp_10_3=interp,
        heat_grad_decay=_fit_heat_decay(grid),
        duhamel=DUHAMEL_CONSTANT,
        c1_coef=_fit_c1_coef(grid, mollifier_kind),
        c2_coef=2.0 * 1.05 * DUHAMEL_CONSTANT * interp,
        nonlinear=_fit_nonlinear(grid),
        caloric_linf_l3=lo,
        caloric_l5l5=hi,
        caloric_l8l4=l84,
        l3_attain=1.05,
        oscillation=_fit_oscillation(grid),
    )


def _table_key(n: int, box_length: float, kind: str) -> str:
    return f"{n}|{box_length:.12g}|{kind}"


def _load_table() -> dict:
    if _DATA_PATH.exists():
        return json.loads(_DATA_PATH.read_text())
    return {}


@lru_cache(maxsize=16)
def _cached(n: int, box_length: float, kind: str) -> GridConstants:
    table = _load_table()
    entry = table.get(_table_key(n, box_length, kind))
    if entry is not None:
        entry = dict(entry)
        entry["oscillation"] = tuple(entry["oscillation"])
        return GridConstants(**entry)
    return compute_constants(sp.make_grid(n, box_length), kind)


def grid_constants(grid: Grid, mollifier_kind: str = "gaussian") -> GridConstants:
    """Fitted constants for this grid, from the shipped table when available."""
    return _cached(grid.n, grid.box_length, mollifier_kind)


def _write_table(specs: list[tuple[int, float, str]]) -> None:
    table = _load_table()
    for n, box, kind in specs:
        consts = compute_constants(sp.make_grid(n, box), kind)
        table[_table_key(n, box, kind)] = consts.to_jsonable()
    _DATA_PATH.parent.mkdir(parents=True, exist_ok=True)
    _DATA_PATH.write_text(json.dumps(table, sort_keys=True, indent=1) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Regenerate the shipped calibration table.")
    parser.add_argument("--write", action="store_true", help="recompute and write data/calibration.json")
    parser.add_argument("--n", type=int, nargs="*", default=[16, 32], help="grid sizes")
    parser.add_argument("--box-length", type=float, default=2.0 * math.pi)
    parser.add_argument("--kind", default="gaussian")
    args = parser.parse_args(argv)
    specs = [(n, args.box_length, args.kind) for n in args.n]
    if args.write:
        _write_table(specs)
        print(f"wrote {_DATA_PATH}")
        return 0
    for n, box, kind in specs:
        print(json.dumps(grid_constants(sp.make_grid(n, box), kind).to_jsonable(), indent=1))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
