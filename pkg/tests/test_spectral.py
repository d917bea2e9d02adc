"""Field algebra: grids, projections, products, norms."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mhdsplit import calibration
from mhdsplit import spectral as sp
from mhdsplit.errors import EmptyTrajectory, GridMismatch, InvalidGrid

from conftest import TWO_PI, single_mode_vector


class TestGrid:
    def test_modes_and_step(self):
        g = sp.make_grid(8, TWO_PI)
        assert sorted(g.modes1d.tolist()) == list(range(-4, 4))
        assert g.k1d[1] == pytest.approx(1.0)
        assert g.k1d[0] == 0.0

    def test_smallest_legal_grid(self):
        g = sp.make_grid(4, 1.0)
        assert g.k1d[1] == pytest.approx(2 * np.pi)

    def test_odd_n_rejected(self):
        with pytest.raises(InvalidGrid):
            sp.make_grid(7, TWO_PI)

    @pytest.mark.parametrize("n,L", [(2, 1.0), (0, 1.0), (16, 0.0), (16, -1.0)])
    def test_bad_parameters(self, n, L):
        with pytest.raises(InvalidGrid):
            sp.make_grid(n, L)

    def test_dealias_mask_two_thirds(self, grid16):
        kept = np.abs(grid16.modes1d) <= 16 // 3
        assert grid16.dealias_mask[:, 0, 0].tolist() == kept.tolist()

    def test_immutability(self, grid16):
        with pytest.raises(ValueError):
            grid16.k2[0, 0, 0] = 1.0


class TestLerayProjection:
    def test_mode_parallel_to_k_is_annihilated(self, grid16):
        c = np.zeros((3, 16, 16, 16), dtype=complex)
        c[0, 1, 0, 0] = 1.0  # u parallel to k = (1, 0, 0)
        c[0, -1, 0, 0] = 1.0
        out = sp.leray_project(sp.vector_from_coeff(grid16, c))
        assert np.max(np.abs(out.coeff)) == 0.0

    def test_mode_orthogonal_to_k_unchanged(self, grid16):
        f = single_mode_vector(grid16, mode=(1, 0, 0), component=1)
        out = sp.leray_project(f)
        assert np.allclose(out.coeff, f.coeff, atol=1e-15)

    def test_matches_dense_per_mode_oracle(self, grid16):
        # independent oracle: explicit 3x3 projector applied mode by mode
        f = sp.vector_from_physical(
            grid16, np.random.default_rng(5).standard_normal((3, 16, 16, 16))
        )
        out = sp.leray_project(f)
        k = grid16.k1d
        expected = np.array(f.coeff, copy=True)
        for a in range(16):
            for b in range(16):
                for c in range(16):
                    kv = np.array([k[a], k[b], k[c]])
                    k2 = kv @ kv
                    if k2 == 0:
                        continue
                    proj = np.eye(3) - np.outer(kv, kv) / k2
                    expected[:, a, b, c] = proj @ f.coeff[:, a, b, c]
        assert np.max(np.abs(out.coeff - expected)) <= 1e-12 * np.max(np.abs(f.coeff))

    def test_idempotent(self, grid16):
        f = sp.random_divfree_field(grid16, seed=1, amplitude=1.0, decay=1.5)
        again = sp.leray_project(f)
        rel = sp.l2_norm(sp.vector_from_coeff(grid16, again.coeff - f.coeff)) / sp.l2_norm(f)
        assert rel <= 1e-12

    def test_annihilates_gradients(self, grid16):
        phi = sp.scalar_from_physical(
            grid16, np.random.default_rng(2).standard_normal((16, 16, 16))
        )
        grad = sp.gradient(phi)
        ratio = sp.l2_norm(sp.leray_project(grad)) / sp.l2_norm(grad)
        assert ratio <= 1e-10

    def test_zero_mode_passthrough(self, grid16):
        c = np.zeros((3, 16, 16, 16), dtype=complex)
        c[2, 0, 0, 0] = 0.7
        out = sp.leray_project(sp.vector_from_coeff(grid16, c))
        assert out.coeff[2, 0, 0, 0] == pytest.approx(0.7)


class TestMollify:
    def test_tiny_epsilon_is_near_identity(self, grid16):
        f = sp.random_divfree_field(grid16, seed=3, amplitude=1.0, decay=1.5)
        out = sp.mollify(f, 1e-8)
        gap = sp.l2_norm(sp.vector_from_coeff(grid16, out.coeff - f.coeff))
        assert gap <= 1e-6 * sp.l2_norm(f)

    def test_constant_field_unchanged(self, grid16):
        c = np.zeros((3, 16, 16, 16), dtype=complex)
        c[0, 0, 0, 0] = 2.5
        f = sp.vector_from_coeff(grid16, c)
        for eps in (0.1, 1.0, 10.0):
            assert np.allclose(sp.mollify(f, eps).coeff, c)

    def test_single_mode_gaussian_scaling(self, grid16):
        # closed-form multiplier at |k| = kappa
        f = single_mode_vector(grid16, mode=(2, 0, 0), component=1, amplitude=1.0)
        eps = 0.4
        out = sp.mollify(f, eps)
        expected = np.exp(-0.5 * eps**2 * 4.0)
        assert out.coeff[1, 2, 0, 0] == pytest.approx(0.5 * expected, rel=1e-14)

    def test_preserves_solenoidality_and_mean(self, grid16):
        f = sp.random_divfree_field(grid16, seed=4, amplitude=1.0, decay=1.5)
        out = sp.mollify(f, 0.5)
        assert out.solenoidal and sp.solenoidal_error(out) <= 1e-10
        assert out.coeff[0, 0, 0, 0] == f.coeff[0, 0, 0, 0]

    def test_gaussian_multiplier_range(self, grid16):
        mult = sp.mollifier_multiplier(grid16, 0.7)
        assert mult[0, 0, 0] == 1.0
        assert np.all(mult > 0) and np.all(mult <= 1.0)

    def test_fejer_multiplier(self, grid16):
        mult = sp.mollifier_multiplier(grid16, 0.7, kind="fejer")
        assert mult[0, 0, 0] == 1.0
        assert np.all(mult >= 0) and np.all(mult <= 1.0)
        assert np.min(mult) == 0.0  # triangle truncates, unlike the gaussian

    def test_unknown_kind(self, grid16):
        with pytest.raises(ValueError):
            sp.mollifier_multiplier(grid16, 0.5, kind="boxcar")


class TestAdvect:
    def test_zero_advector(self, grid16):
        w = sp.random_divfree_field(grid16, seed=6, amplitude=1.0, decay=1.5)
        out = sp.advect(sp.zero_vector(grid16), w)
        assert sp.l2_norm(out) == 0.0

    def test_constant_fields(self, grid16):
        c = np.zeros((3, 16, 16, 16), dtype=complex)
        c[0, 0, 0, 0] = 1.0
        f = sp.vector_from_coeff(grid16, c)
        assert sp.l2_norm(sp.advect(f, f)) == 0.0

    def test_trigonometric_oracle(self, grid16):
        X, Y, Z = grid16.coordinates()
        u = np.zeros((3, 16, 16, 16))
        u[0] = np.sin(Y)
        w = np.zeros((3, 16, 16, 16))
        w[1] = np.sin(X)
        out = sp.advect(sp.vector_from_physical(grid16, u), sp.vector_from_physical(grid16, w))
        expected = np.zeros((3, 16, 16, 16))
        expected[1] = np.sin(Y) * np.cos(X)
        assert np.max(np.abs(out.physical() - expected)) <= 1e-12

    def test_grid_mismatch(self, grid16, grid8):
        with pytest.raises(GridMismatch):
            sp.advect(sp.zero_vector(grid16), sp.zero_vector(grid8))

    @given(seed=st.integers(0, 10_000))
    def test_transport_skew_symmetry(self, seed):
        # <(u.grad)w, w> vanishes for solenoidal u under 2/3 dealiasing
        grid = sp.make_grid(8, TWO_PI)
        u = sp.random_divfree_field(grid, seed=seed, amplitude=1.0, decay=1.0)
        w = sp.random_divfree_field(grid, seed=seed + 1, amplitude=1.0, decay=1.0)
        val = abs(sp.l2_inner(sp.advect(u, w), w))
        assert val <= 1e-8 * sp.l2_norm(u) * sp.l2_norm(w) ** 2


class TestOuterAndDivergence:
    def test_outer_zero(self, grid16):
        w = sp.random_divfree_field(grid16, seed=7, amplitude=1.0, decay=1.5)
        t = sp.outer(sp.zero_vector(grid16), w)
        assert np.max(np.abs(t.coeff)) == 0.0

    def test_divergence_form_matches_advect(self, grid16):
        u = sp.random_divfree_field(grid16, seed=8, amplitude=1.0, decay=1.5)
        w = sp.random_divfree_field(grid16, seed=9, amplitude=1.0, decay=1.5)
        td = sp.tensor_divergence(sp.outer(u, w))
        av = sp.advect(u, w)
        rel = sp.l2_norm(sp.vector_from_coeff(grid16, td.coeff - av.coeff)) / sp.l2_norm(av)
        assert rel <= 1e-10

    def test_outer_self_symmetric(self, grid16):
        u = sp.random_divfree_field(grid16, seed=10, amplitude=1.0, decay=1.5)
        t = sp.outer(u, u)
        assert np.array_equal(t.coeff, np.swapaxes(t.coeff, 0, 1))


class TestNorms:
    def test_zero_field_every_p(self, grid16):
        z = sp.zero_vector(grid16)
        for p in (1.0, 2.0, 3.0, 10.0 / 3.0, np.inf):
            assert sp.lp_norm(z, p) == 0.0

    def test_sine_l2(self, grid16):
        X, _, _ = grid16.coordinates()
        u = np.zeros((3, 16, 16, 16))
        u[0] = np.sin(X)
        f = sp.vector_from_physical(grid16, u)
        assert sp.lp_norm(f, 2.0) == pytest.approx(np.sqrt(TWO_PI**3 / 2.0), rel=1e-12)

    def test_sine_l3_vs_quadrature_oracle(self, grid32):
        # oracle: dense 1-d quadrature of |sin|^3 times the transverse area
        X, _, _ = grid32.coordinates()
        u = np.zeros((3, 32, 32, 32))
        u[0] = np.sin(X)
        f = sp.vector_from_physical(grid32, u)
        s = np.linspace(0.0, TWO_PI, 20_001)
        oracle = (np.trapezoid(np.abs(np.sin(s)) ** 3, s) * TWO_PI**2) ** (1.0 / 3.0)
        assert oracle == pytest.approx(((8.0 / 3.0) * TWO_PI**2) ** (1.0 / 3.0), rel=1e-9)
        assert sp.lp_norm(f, 3.0) == pytest.approx(oracle, rel=2e-5)

    def test_linf_is_grid_max(self, grid16):
        X, _, _ = grid16.coordinates()
        u = np.zeros((3, 16, 16, 16))
        u[0] = np.sin(X)
        assert sp.lp_norm(sp.vector_from_physical(grid16, u), np.inf) == pytest.approx(1.0, abs=1e-12)

    def test_p_below_one_rejected(self, grid16):
        with pytest.raises(ValueError):
            sp.lp_norm(sp.zero_vector(grid16), 0.5)

    def test_parseval(self, grid16):
        f = sp.random_divfree_field(grid16, seed=11, amplitude=1.0, decay=1.5)
        assert abs(sp.lp_norm(f, 2.0) - sp.l2_norm(f)) <= 1e-10 * sp.l2_norm(f)


class TestSobolev:
    def test_single_mode_eigenvalues(self, grid16):
        kappa = 3.0
        f = single_mode_vector(grid16, mode=(3, 0, 0), component=1)
        a = sp.l2_norm(f)
        assert sp.sobolev_seminorm(f, 1.0) == pytest.approx(kappa * a, rel=1e-13)
        assert sp.sobolev_seminorm(f, -1.0) == pytest.approx(a / kappa, rel=1e-13)

    def test_cauchy_schwarz_interpolation(self, grid16):
        for seed in range(20):
            f = sp.random_divfree_field(grid16, seed=300 + seed, amplitude=1.0, decay=1.2)
            l2 = sp.l2_norm(f)
            assert l2**2 <= sp.sobolev_seminorm(f, 1.0) * sp.sobolev_seminorm(f, -1.0) * (1 + 1e-12)

    def test_inhomogeneous_minus_three_halves_includes_mean(self, grid16):
        c = np.zeros((3, 16, 16, 16), dtype=complex)
        c[0, 0, 0, 0] = 1.0
        f = sp.vector_from_coeff(grid16, c)
        assert sp.sobolev_seminorm(f, -1.5) == pytest.approx(np.sqrt(TWO_PI**3), rel=1e-13)
        assert sp.sobolev_seminorm(f, 1.0) == 0.0

    def test_unsupported_order(self, grid16):
        with pytest.raises(ValueError):
            sp.sobolev_seminorm(sp.zero_vector(grid16), 0.5)


class TestMixedNorm:
    def test_constant_in_time(self, grid16):
        f = sp.random_divfree_field(grid16, seed=12, amplitude=1.0, decay=1.5)
        T, M = 0.8, 33
        val = sp.mixed_norm([f] * M, T / (M - 1), 5.0, 5.0)
        assert val == pytest.approx(T**0.2 * sp.lp_norm(f, 5.0), rel=1e-12)

    def test_zero_trajectory(self, grid16):
        assert sp.mixed_norm([sp.zero_vector(grid16)] * 5, 0.1, 2.0, 2.0) == 0.0

    def test_linear_amplitude_quadrature_oracle(self, grid16):
        # a(t) = t with unit-L2 profile: L2-in-time norm is 1/sqrt(3)
        base = sp.random_divfree_field(grid16, seed=13, amplitude=1.0, decay=2.0)
        unit = sp.vector_from_coeff(grid16, base.coeff / sp.lp_norm(base, 2.0))
        times = np.linspace(0.0, 1.0, 201)
        fields = [sp.vector_from_coeff(grid16, t * unit.coeff) for t in times]
        val = sp.mixed_norm(fields, float(times[1]), 2.0, 2.0)
        assert val == pytest.approx(1.0 / np.sqrt(3.0), rel=2e-5)

    def test_empty_trajectory(self):
        with pytest.raises(EmptyTrajectory):
            sp.mixed_norm([], 0.1, 2.0, 2.0)

    def test_linf_in_time(self, grid16):
        f = sp.random_divfree_field(grid16, seed=14, amplitude=1.0, decay=1.5)
        fields = [sp.vector_from_coeff(grid16, a * f.coeff) for a in (0.2, 1.0, 0.5)]
        assert sp.mixed_norm(fields, 0.1, np.inf, 2.0) == pytest.approx(sp.lp_norm(f, 2.0), rel=1e-12)


class TestRandomDivfree:
    def test_deterministic(self, grid16):
        a = sp.random_divfree_field(grid16, seed=42, amplitude=1.0, decay=2.0)
        b = sp.random_divfree_field(grid16, seed=42, amplitude=1.0, decay=2.0)
        assert np.array_equal(a.coeff, b.coeff)

    def test_zero_amplitude(self, grid16):
        f = sp.random_divfree_field(grid16, seed=42, amplitude=0.0, decay=2.0)
        assert np.max(np.abs(f.coeff)) == 0.0

    def test_projection_idempotence(self, grid16):
        f = sp.random_divfree_field(grid16, seed=43, amplitude=1.0, decay=2.0)
        pf = sp.leray_project(f)
        gap = sp.l2_norm(sp.vector_from_coeff(grid16, pf.coeff - f.coeff))
        assert gap <= 1e-12 * sp.l2_norm(f)

    def test_metadata_records_generator(self, grid16):
        f = sp.random_divfree_field(grid16, seed=44, amplitude=0.3, decay=2.5)
        assert f.meta["seed"] == 44
        assert f.meta["amplitude"] == 0.3
        assert "generator" in f.meta

    def test_hermitian_and_realness(self, grid16):
        f = sp.random_divfree_field(grid16, seed=45, amplitude=1.0, decay=2.0)
        assert sp.hermitian_error(f) <= 1e-12
        assert np.max(np.abs(np.imag(sp._ifftn(f.coeff)))) <= 1e-13


class TestInterpolationConstant:
    def test_fitted_constant_dominates_fresh_corpus(self, grid16):
        consts = calibration.grid_constants(grid16)
        for i in range(100):
            f = sp.random_divfree_field(grid16, seed=60_000 + i, amplitude=1.0, decay=1.0 + 0.4 * (i % 6))
            denom = sp.lp_norm(f, 2.0) ** 0.4 * sp.sobolev_seminorm(f, 1.0) ** 0.6
            assert sp.lp_norm(f, 10.0 / 3.0) <= consts.interp_10_3 * denom
