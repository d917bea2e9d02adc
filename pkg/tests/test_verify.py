"""Inequality audits: energy reports, growth ratios, oscillation, sweeps."""

import numpy as np
import pytest

from mhdsplit import calibration
from mhdsplit import caloric as ca
from mhdsplit import fixedpoint as fp
from mhdsplit import presets
from mhdsplit import scheme as sc
from mhdsplit import spectral as sp
from mhdsplit import verify
from mhdsplit.errors import ScalingViolation, UnsupportedTestFunction

from conftest import TWO_PI

PARAMS = sc.SchemeParams(epsilon=0.5, horizon=0.125, dt=1.0 / 128.0, picard_tol=1e-12)


@pytest.fixture(scope="module")
def tg_data():
    grid = sp.make_grid(16, TWO_PI)
    return grid, presets.initial_data(grid, "taylor_green", amplitude=0.1)


@pytest.fixture(scope="module")
def solved(tg_data):
    grid, (v0, h0) = tg_data
    return sc.solve_window(v0, h0, PARAMS)


@pytest.fixture(scope="module")
def zero_traj():
    grid = sp.make_grid(16, TWO_PI)
    return sc.solve_window(sp.zero_vector(grid), sp.zero_vector(grid), PARAMS)


def _synthetic_traj(grid, v0, h0, state_seed=None):
    """Window with prescribed initial data and zero (or seeded) perturbation states."""
    times = np.linspace(0.0, 0.125, 9)
    cal = ca.caloric_pair(v0, h0, times)
    states = []
    for i, t in enumerate(times):
        if state_seed is None:
            v2 = sp.zero_vector(grid)
            H2 = sp.zero_vector(grid)
        else:
            v2 = sp.random_divfree_field(grid, seed=state_seed + 2 * i, amplitude=0.01, decay=2.0)
            H2 = sp.random_divfree_field(grid, seed=state_seed + 2 * i + 1, amplitude=0.01, decay=2.0)
        states.append(sc.MhdState(v2=v2, H2=H2, t=float(t)))
    cert = fp.FixedPointCertificate(x1=1.0, x2=2.0, gamma=0.1, iterations=1, final_residual=0.0)
    consts = sc.ContractionConstants(1.0, 0.0, 0.0, 1.0, 1.0, 0.5, 0.125, "synthetic")
    w = sc.Window(caloric=cal, states=tuple(states), certificate=cert, constants=consts, params=PARAMS)
    return sc.Trajectory(grid=grid, params=PARAMS, windows=(w,))


class TestGlobalEnergyAudit:
    def test_zero_run_is_identically_zero(self, zero_traj):
        rep = verify.global_energy_audit(zero_traj)
        assert np.all(rep.lhs == 0.0) and np.all(rep.rhs == 0.0)
        assert rep.passed

    def test_residual_zero_at_start(self, solved):
        rep = verify.global_energy_audit(solved)
        assert rep.residual[0] == 0.0

    def test_identity_on_mollified_run(self, solved):
        rep = verify.global_energy_audit(solved)
        assert rep.passed
        assert np.all(np.abs(rep.residual) <= rep.tolerance)

    def test_dissipation_part_monotone(self, solved):
        w = solved.windows[0]
        diss = np.array(
            [
                sp.sobolev_seminorm(s.v2, 1.0) ** 2 + sp.sobolev_seminorm(s.H2, 1.0) ** 2
                for s in w.states
            ]
        )
        running = np.cumsum(0.5 * w.dt * (diss[1:] + diss[:-1]))
        assert np.all(np.diff(running) >= 0.0)

    def test_only_magnetic_terms_when_v1_vanishes(self, grid16):
        h0 = sp.random_divfree_field(grid16, seed=81, amplitude=0.3, decay=1.5)
        traj = _synthetic_traj(grid16, sp.zero_vector(grid16), h0, state_seed=400)
        w = traj.windows[0]
        m = 4
        got = verify._cross_terms_node(w, m)
        v, H = w.total(m)
        H1 = w.caloric.H1[m]
        vol = grid16.volume
        expected = -verify._inner_spec(sp.advect(H, w.states[m].v2).coeff, H1.coeff, vol)
        expected += verify._inner_spec(sp.advect(v, w.states[m].H2).coeff, H1.coeff, vol)
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_audit_is_repeatable(self, solved):
        a = verify.global_energy_audit(solved)
        b = verify.global_energy_audit(solved)
        assert np.array_equal(a.lhs, b.lhs) and np.array_equal(a.rhs, b.rhs)


class TestLocalEnergyAudit:
    def test_rejects_phi_touching_boundaries(self, solved):
        with pytest.raises(UnsupportedTestFunction):
            verify.local_energy_audit(solved, verify.BumpTestFunction(0.0, 0.05))
        with pytest.raises(UnsupportedTestFunction):
            verify.local_energy_audit(solved, verify.BumpTestFunction(0.12, 0.05))

    def test_rejects_phi_outside_box(self, solved):
        L = solved.grid.box_length
        phi = verify.BumpTestFunction(
            0.0625, 0.05, space_center=(0.1, 0.5 * L, 0.5 * L), space_halfwidth=(0.5, 1.0, 1.0)
        )
        with pytest.raises(UnsupportedTestFunction):
            verify.local_energy_audit(solved, phi)

    def test_zero_perturbation_run(self, tg_data):
        grid, (v0, _) = tg_data
        traj = sc.solve_window(v0, v0, PARAMS)
        phi = verify.BumpTestFunction(0.0625, 0.05)
        rep = verify.local_energy_audit(traj, phi)
        assert np.all(rep.lhs == 0.0) and np.all(rep.rhs == 0.0)
        assert rep.passed

    def test_passes_on_mollified_run(self, solved):
        L = solved.grid.box_length
        phi = verify.BumpTestFunction(
            0.0625, 0.05,
            space_center=(0.5 * L, 0.5 * L, 0.5 * L),
            space_halfwidth=(0.4 * L, 0.4 * L, 0.4 * L),
        )
        rep = verify.local_energy_audit(solved, phi)
        assert rep.passed

    def test_constant_phi_matches_windowed_global_audit(self, solved):
        # with grad phi = 0 the verbatim form reduces to psi-weighted global
        # quantities; both pipelines must agree to quadrature accuracy
        phi = verify.BumpTestFunction(0.0625, 0.05)
        loc = verify.local_energy_audit(solved, phi)
        w = solved.windows[0]
        dt = w.dt
        M = len(w.times)
        E = np.empty(M)
        D = np.empty(M)
        S = np.empty(M)
        b = np.empty(M)
        bdot = np.empty(M)
        for m in range(M):
            v2, H2 = w.states[m].v2, w.states[m].H2
            E[m] = sp.l2_norm(v2) ** 2 + sp.l2_norm(H2) ** 2
            D[m] = sp.sobolev_seminorm(v2, 1.0) ** 2 + sp.sobolev_seminorm(H2, 1.0) ** 2
            S[m] = verify._cross_terms_node(w, m)
            b[m], bdot[m] = phi.time_factor(float(w.times[m]))
        g_lhs = b * E + 2.0 * verify._cumtrapz(b * D, dt)
        g_rhs = verify._cumtrapz(bdot * E + b * S, dt)
        scale = max(np.max(np.abs(g_lhs)), np.max(np.abs(g_rhs)))
        assert np.max(np.abs(loc.lhs - g_lhs)) <= 1e-10 * scale
        assert np.max(np.abs(loc.rhs - g_rhs)) <= 1e-10 * scale

    def test_measured_deficit_explains_residual(self, solved):
        # the stated form misses half of the caloric production: the signed
        # measured deficit must cancel the residual to integrator order
        L = solved.grid.box_length
        phi = verify.BumpTestFunction(
            0.0625, 0.05,
            space_center=(0.5 * L, 0.5 * L, 0.5 * L),
            space_halfwidth=(0.4 * L, 0.4 * L, 0.4 * L),
        )
        rep = verify.local_energy_audit(solved, phi)
        deficit = rep.extras["caloric_deficit"]
        closure = np.abs(rep.residual + deficit)
        scale = np.max(np.abs(deficit)) + 1e-12
        assert np.max(closure) <= 0.1 * scale


class TestAprioriAudit:
    def test_zero_run(self, zero_traj):
        rep = verify.apriori_audit(zero_traj)
        assert np.all(rep.sup_ratio == 0.0) and np.all(rep.xt_ratio == 0.0)
        assert rep.passed

    def test_finite_and_stable_on_small_run(self, solved):
        rep = verify.apriori_audit(solved)
        assert np.all(np.isfinite(rep.sup_ratio)) and np.all(np.isfinite(rep.xt_ratio))
        assert rep.passed


class TestCaloricBoundsAudit:
    def test_zero_data(self, grid16):
        pair = ca.caloric_pair(sp.zero_vector(grid16), sp.zero_vector(grid16), np.linspace(0, 0.5, 9))
        rep = verify.caloric_bounds_audit(pair)
        assert rep.passed and rep.l5l5 == 0.0

    def test_bounds_hold(self, solved):
        rep = verify.caloric_bounds_audit(solved.windows[0].caloric)
        assert rep.passed
        assert rep.linf_l3 <= rep.base_l3 * (1 + 1e-8)

    def test_smoothing_decreases_l5l5(self, grid16):
        v0 = sp.random_divfree_field(grid16, seed=91, amplitude=1.0, decay=1.2)
        smooth = ca.heat_flow(v0, 0.05)
        times = np.linspace(0, 1.0, 17)
        rough_rep = verify.caloric_bounds_audit(ca.caloric_pair(v0, v0, times))
        smooth_rep = verify.caloric_bounds_audit(ca.caloric_pair(smooth, smooth, times))
        assert smooth_rep.l5l5 < rough_rep.l5l5


class TestNonlinearNormAudit:
    def test_zero_trajectory_ratio_zero(self, zero_traj):
        rep = verify.nonlinear_norm_audit(zero_traj, ((1.5, 1.125),))
        assert all(r[3] == 0.0 for r in rep.rows)
        assert rep.passed

    def test_standard_pair_finite(self, solved):
        rep = verify.nonlinear_norm_audit(solved, ((1.5, 1.125),))
        assert rep.passed
        assert all(np.isfinite(r[3]) for r in rep.rows)

    def test_scaling_violation(self, solved):
        with pytest.raises(ScalingViolation):
            verify.nonlinear_norm_audit(solved, ((1.0, 1.0),))

    def test_two_one_is_on_the_scaling_line(self, solved):
        rep = verify.nonlinear_norm_audit(solved, ((2.0, 1.0),))
        assert rep.passed


class TestOscillation:
    def test_constant_pressure_zero_left(self, grid16):
        c = np.zeros((16, 16, 16), dtype=complex)
        c[0, 0, 0] = 3.0
        f = sp.scalar_from_coeff(grid16, c)
        left, right, rows = verify.oscillation_sides([f, f, f], 0.1, TWO_PI / 4.0, 1.5, 1.5, 1.0)
        assert left == 0.0

    def test_part4_right_side_scales_three_halves(self, grid16):
        # with q = 1 the block sum telescopes, so right(2R)/right(R) = 2^{3/2}
        rng = np.random.default_rng(17)
        f = sp.scalar_from_physical(grid16, rng.standard_normal((16, 16, 16)))
        f = sp.dealias(f)
        fields = [f, f]
        _, right_R, _ = verify.oscillation_sides(fields, 0.1, TWO_PI / 8.0, 1.5, 1.5, 1.0)
        _, right_2R, _ = verify.oscillation_sides(fields, 0.1, TWO_PI / 4.0, 1.5, 1.5, 1.0)
        assert right_2R / right_R == pytest.approx(2.0**1.5, rel=1e-12)

    def test_audit_on_decomposed_pressure(self, solved):
        dec = sc.pressure_decompose(solved)
        for R in (TWO_PI / 8.0, TWO_PI / 4.0, TWO_PI / 2.0):
            rep = verify.oscillation_audit(dec.parts, dec.times, R)
            assert rep.passed

    def test_bad_subbox_size(self, grid16):
        f = sp.scalar_from_physical(grid16, np.zeros((16, 16, 16)))
        with pytest.raises(ValueError):
            verify.oscillation_sides([f], 0.1, 1.0, 1.5, 1.5, 1.0)


class TestEpsilonSweep:
    def test_zero_data(self, grid16):
        rep = verify.epsilon_sweep(sp.zero_vector(grid16), sp.zero_vector(grid16), PARAMS)
        assert all(d == 0.0 for d in rep.distances)
        assert rep.passed

    def test_elsasser_levels_identical(self, tg_data):
        grid, (v0, _) = tg_data
        rep = verify.epsilon_sweep(v0, v0, PARAMS)
        assert all(d <= 1e-13 for d in rep.distances)
        assert rep.passed


class TestNormLedger:
    def test_entries_finite_and_nonnegative(self, solved):
        ledger = verify.build_norm_ledger(solved)
        assert ledger.passed
        header, rows = ledger.to_rows()
        assert len(rows) == len(ledger.times)
        assert len(header) == 1 + 4 * 8
