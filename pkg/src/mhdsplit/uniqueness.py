"""Gronwall machinery and the two-trajectory stability experiment.

The difference energy D(t) of two runs is tracked together with the
fifth-power caloric weights g1, g2 and fitted into the exponential
envelope D(t) <= D(0) exp(Chat G(t)), G = int (g1 + g2).  The stability
experiment perturbs the initial velocity by a solenoidal field of
prescribed L^3 size and checks that the envelope holds with a moderate
constant and that the fitted rate is stable across perturbation sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import scheme as sc
from . import spectral as sp
from .errors import GridMismatch, InvalidParams, NegativeWeight, NodeMismatch
from .spectral import VectorField

__all__ = [
    "StabilityReport",
    "SmallnessWindow",
    "gronwall_bound",
    "difference_energy",
    "stability_experiment",
    "StabilityVerdict",
    "smallness_window",
]


def gronwall_bound(
    eta0: float, phi_samples: np.ndarray, psi_samples: np.ndarray, dt: float
) -> dict:
    """Both closed forms of the integral Gronwall bound on uniform nodes.

    Form (a): eta(t) <= exp(int phi) * (eta(0) + int psi).
    Form (b): eta(t) <= a(t) * exp(int phi) with a(t) = eta0 + int psi
    (an increasing majorant).  Cumulative integrals use the trapezoid rule.
    """
    phi_samples = np.asarray(phi_samples, dtype=float)
    psi_samples = np.asarray(psi_samples, dtype=float)
    if np.any(phi_samples < 0) or np.any(psi_samples < 0):
        raise NegativeWeight("Gronwall weights must be nonnegative")
    if phi_samples.shape != psi_samples.shape:
        raise ValueError("phi and psi need matching shapes")
    M = len(phi_samples)
    cum_phi = np.zeros(M)
    cum_psi = np.zeros(M)
    if M > 1:
        cum_phi[1:] = np.cumsum(0.5 * dt * (phi_samples[1:] + phi_samples[:-1]))
        cum_psi[1:] = np.cumsum(0.5 * dt * (psi_samples[1:] + psi_samples[:-1]))
    bound_a = np.exp(cum_phi) * (eta0 + cum_psi)
    bound_b = (eta0 + cum_psi) * np.exp(cum_phi)
    return {"a": bound_a, "b": bound_b, "cum_phi": cum_phi, "cum_psi": cum_psi}


@dataclass(frozen=True)
class StabilityReport:
    """Difference energy of two runs with its fitted Gronwall envelope."""

    times: np.ndarray
    D: np.ndarray  # ||w||_L2^2 + ||psi||_L2^2 per node
    dissipation: np.ndarray  # cumulative int (|grad w|^2 + |grad psi|^2)
    g1: np.ndarray
    g2: np.ndarray
    envelope_rate: float  # Chat fitted on log D
    envelope: np.ndarray  # D(0) exp(Chat * G(t))

    def to_rows(self) -> tuple[list[str], list[list]]:
        header = ["t", "D", "dissipation", "g1", "g2", "envelope"]
        rows = [
            [float(t), float(d), float(di), float(a), float(b), float(e)]
            for t, d, di, a, b, e in zip(
                self.times, self.D, self.dissipation, self.g1, self.g2, self.envelope
            )
        ]
        return header, rows


def _node_fields(traj: sc.Trajectory):
    out = []
    for w, m, t in traj.nodes():
        v, H = w.total(m)
        out.append((t, v, H))
    return out


def difference_energy(a: sc.Trajectory, b: sc.Trajectory) -> StabilityReport:
    """Difference report for two trajectories on identical grids and nodes.

    The difference is taken between total fields, so runs that share the
    caloric split reduce to the perturbation difference, while perturbed
    initial data enters through its own caloric part.  Gronwall weights
    g1, g2 are the fifth-power norms of the first trajectory's caloric
    extension; the envelope rate is a least-squares fit on log D over
    nodes where D clears the roundoff floor.
    """
    if not a.grid.compatible(b.grid):
        raise GridMismatch("trajectories live on different grids")
    na, nb = _node_fields(a), _node_fields(b)
    if len(na) != len(nb) or any(abs(x[0] - y[0]) > 1e-12 for x, y in zip(na, nb)):
        raise NodeMismatch("trajectories carry different time nodes")
    times = np.array([t for t, _, _ in na])
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
    vol = a.grid.volume
    k2 = a.grid.k2

    D = np.empty(len(na))
    diss_density = np.empty(len(na))
    for i, ((_, va, Ha), (_, vb, Hb)) in enumerate(zip(na, nb)):
        dv = vb.coeff - va.coeff
        dH = Hb.coeff - Ha.coeff
        D[i] = vol * float(np.sum(np.abs(dv) ** 2) + np.sum(np.abs(dH) ** 2))
        diss_density[i] = vol * float(
            np.sum(k2 * np.abs(dv) ** 2) + np.sum(k2 * np.abs(dH) ** 2)
        )
    dissipation = np.zeros(len(na))
    if len(na) > 1:
        dissipation[1:] = np.cumsum(0.5 * dt * (diss_density[1:] + diss_density[:-1]))

    cal = a.windows[0].caloric
    g1 = np.array([sp.lp_norm(f, 5.0) ** 5 for f in cal.v1])
    g2 = np.array([sp.lp_norm(f, 5.0) ** 5 for f in cal.H1])
    if len(g1) != len(times):
        # multi-window baseline: rebuild weights node by node
        g1 = np.array([sp.lp_norm(w.caloric.v1[m], 5.0) ** 5 for w, m, _ in a.nodes()])
        g2 = np.array([sp.lp_norm(w.caloric.H1[m], 5.0) ** 5 for w, m, _ in a.nodes()])

    G = np.zeros(len(times))
    if len(times) > 1:
        gsum = g1 + g2
        G[1:] = np.cumsum(0.5 * dt * (gsum[1:] + gsum[:-1]))
    floor = max(float(np.max(D)), 1e-300) * 1e-22
    mask = (D > floor) & (D[0] > floor)
    rate = 0.0
    if D[0] > floor and np.sum(mask) >= 2 and np.any(G[mask] > 0):
        y = np.log(D[mask] / D[0])
        x = G[mask]
        denom = float(np.sum(x * x))
        rate = float(np.sum(x * y) / denom) if denom > 0 else 0.0
    envelope = D[0] * np.exp(rate * G)
    return StabilityReport(
        times=times, D=D, dissipation=dissipation, g1=g1, g2=g2,
        envelope_rate=rate, envelope=envelope,
    )


@dataclass(frozen=True)
class SmallnessWindow:
    """Running sup of the drift of the total fields from the initial data."""

    times: np.ndarray
    v_drift: np.ndarray  # sup_{s <= t} ||v(s) - v0||_L3
    h_drift: np.ndarray

    def to_rows(self) -> tuple[list[str], list[list]]:
        header = ["t", "v_drift_l3", "h_drift_l3"]
        rows = [[float(t), float(a), float(b)] for t, a, b in zip(self.times, self.v_drift, self.h_drift)]
        return header, rows


def smallness_window(traj: sc.Trajectory) -> SmallnessWindow:
    """Empirical smallness profile: candidate windows for the uniqueness regime."""
    v0, h0 = traj.initial_data
    times, vs, hs = [], [], []
    sup_v = 0.0
    sup_h = 0.0
    for w, m, t in traj.nodes():
        v, H = w.total(m)
        sup_v = max(sup_v, sp.lp_norm(sp.vector_from_coeff(v.grid, v.coeff - v0.coeff), 3.0))
        sup_h = max(sup_h, sp.lp_norm(sp.vector_from_coeff(H.grid, H.coeff - h0.coeff), 3.0))
        times.append(t)
        vs.append(sup_v)
        hs.append(sup_h)
    return SmallnessWindow(times=np.array(times), v_drift=np.array(vs), h_drift=np.array(hs))


@dataclass(frozen=True)
class StabilityVerdict:
    """Per-delta envelope constants and the combined pass flag."""

    deltas: tuple
    envelope_constants: tuple  # K per delta: sup D / (delta^2 exp(Chat G))
    rates: tuple  # Chat per delta
    sup_D: tuple
    passed: bool
    reports: tuple = ()

    def to_jsonable(self) -> dict:
        return {
            "deltas": list(self.deltas),
            "envelope_constants": list(self.envelope_constants),
            "rates": list(self.rates),
            "sup_D": list(self.sup_D),
            "passed": self.passed,
        }


def _perturbation(grid, seed: int) -> VectorField:
    p = sp.random_divfree_field(grid, seed=seed, amplitude=1.0, decay=2.0)
    scale = sp.lp_norm(p, 3.0)
    return sp.vector_from_coeff(grid, p.coeff / scale, solenoidal=True)


def stability_experiment(
    v0: VectorField,
    h0: VectorField,
    params: sc.SchemeParams,
    deltas=(1e-4, 1e-5),
    seed: int = 5150,
    envelope_limit: float = 10.0,
    rate_spread_limit: float = 2.0,
) -> tuple[tuple[StabilityReport, ...], StabilityVerdict]:
    """Baseline vs perturbed runs with Gronwall-envelope verdict.

    The perturbation is a fixed unit-L^3 solenoidal field scaled by each
    delta and added to the initial velocity; the perturbed run re-splits
    through its own caloric extension.  PASS requires the envelope
    constant K <= ``envelope_limit`` for every delta and the fitted rates
    to agree within ``rate_spread_limit``.
    """
    if any(d < 0 for d in deltas):
        raise InvalidParams("perturbation sizes must be nonnegative")
    base = sc.solve_window(v0, h0, params)
    fixed = replace(
        params, window_policy="fixed",
        window_length=base.windows[0].horizon - float(base.windows[0].times[0]),
        horizon=base.windows[0].horizon - float(base.windows[0].times[0]),
    )
    direction = _perturbation(v0.grid, seed)
    reports = []
    consts = []
    rates = []
    sups = []
    for delta in deltas:
        v0p = sp.vector_from_coeff(v0.grid, v0.coeff + delta * direction.coeff, solenoidal=True)
        pert = sc.solve_window(v0p, h0, fixed)
        rep = difference_energy(base, pert)
        reports.append(rep)
        sups.append(float(np.max(rep.D)))
        rates.append(rep.envelope_rate)
        if delta == 0:
            consts.append(0.0)
            continue
        G = np.zeros(len(rep.times))
        if len(rep.times) > 1:
            gsum = rep.g1 + rep.g2
            dt = float(rep.times[1] - rep.times[0])
            G[1:] = np.cumsum(0.5 * dt * (gsum[1:] + gsum[:-1]))
        env = delta**2 * np.exp(rep.envelope_rate * G)
        K = float(np.max(rep.D / np.maximum(env, 1e-300)))
        consts.append(K)
    nonzero = [d for d in deltas if d > 0]
    ok = all(k <= envelope_limit for k, d in zip(consts, deltas) if d > 0)
    if len(nonzero) >= 2:
        finite = [r for r, d in zip(rates, deltas) if d > 0]
        lo, hi = min(finite), max(finite)
        if hi > 0 and lo > 0:
            ok = ok and hi / lo <= rate_spread_limit
        elif hi < 0 and lo < 0:
            ok = ok and lo / hi <= rate_spread_limit
        else:
            ok = ok and (hi - lo) <= max(abs(hi), abs(lo), 1e-12)
    verdict = StabilityVerdict(
        deltas=tuple(deltas),
        envelope_constants=tuple(consts),
        rates=tuple(rates),
        sup_D=tuple(sups),
        passed=ok,
        reports=tuple(reports),
    )
    return tuple(reports), verdict
