import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from errors import InvalidInputError, ResolutionError, UndefinedRatioError, WindowError
from spectral import (ComplexField, Dispersion, Grid, MultiplierSpec, NormSpec, RealField,
                      SpaceTimeField, apply_multiplier, apply_window, dealias, decay_check,
                      derivative, hermitian_defect, lp_norm, multiplier_equivalence_check, psi,
                      random_band_limited, sobolev_norm, xsb_norm)


def gaussian(grid, width=1.0):
    return RealField.from_function(grid, lambda x: np.exp(-x ** 2 / (2 * width ** 2)))


class TestGrid:
    def test_lattice(self):
        grid = Grid(64, math.pi)
        assert grid.dx == pytest.approx(2 * math.pi / 64)
        assert grid.x[0] == -math.pi
        np.testing.assert_allclose(np.sort(grid.xi)[[0, -1]], [-32, 31])

    @pytest.mark.parametrize('nx', [100, 4, 0])
    def test_rejects_non_power_of_two(self, nx):
        with pytest.raises(InvalidInputError):
            Grid(nx, 1.0)

    def test_rejects_bad_length(self):
        with pytest.raises(InvalidInputError):
            Grid(64, -1.0)

    def test_arrays_are_read_only(self):
        grid = Grid(16, 1.0)
        with pytest.raises(ValueError):
            grid.xi[0] = 1.0

    def test_forward_matches_continuous_transform(self):
        grid = Grid(256, 8 * math.pi)
        spec = gaussian(grid).spectrum
        exact = math.sqrt(2 * math.pi) * np.exp(-grid.xi ** 2 / 2)
        np.testing.assert_allclose(spec.real, exact, atol=1e-10)
        np.testing.assert_allclose(spec.imag, 0.0, atol=1e-10)

    def test_parseval(self, rng):
        grid = Grid(128, 5.0)
        u = random_band_limited(grid, 10.0, rng)
        physical = np.sum(np.abs(u.values) ** 2) * grid.dx
        spectral = grid.parseval_weight * np.sum(np.abs(u.spectrum) ** 2)
        assert physical == pytest.approx(spectral, rel=1e-12)

    def test_inverse_undoes_forward(self, rng):
        grid = Grid(64, 3.0)
        u = random_band_limited(grid, 20.0, rng)
        np.testing.assert_allclose(grid.inverse(grid.forward(u.values)), u.values, atol=1e-13)


class TestFields:
    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            ComplexField(Grid(16, 1.0), np.zeros(8))

    def test_real_field_drops_imaginary_part(self):
        grid = Grid(16, 1.0)
        f = RealField(grid, np.ones(16) + 2j)
        assert f.values.dtype == np.float64
        np.testing.assert_array_equal(f.values, 1.0)

    def test_from_spectrum_keeps_spectrum(self, rng):
        grid = Grid(32, 2.0)
        spectrum = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        f = ComplexField.from_spectrum(grid, spectrum)
        np.testing.assert_array_equal(f.spectrum, spectrum)

    def test_real_field_spectrum_is_hermitian(self, rng):
        grid = Grid(64, 2.0)
        v = random_band_limited(grid, 15.0, rng, real=True)
        assert isinstance(v, RealField)
        assert hermitian_defect(v) < 1e-12 * np.max(np.abs(v.spectrum))


class TestNorms:
    def test_sobolev_zero_is_l2(self, rng):
        grid = Grid(128, 4.0)
        u = random_band_limited(grid, 8.0, rng)
        assert sobolev_norm(u, 0.0) == pytest.approx(lp_norm(u, 2), rel=1e-12)

    def test_sobolev_of_single_mode(self):
        grid = Grid(32, math.pi)
        u = ComplexField.from_function(grid, lambda x: np.exp(3j * x))
        expected = math.sqrt(2 * math.pi) * (1 + 9) ** 0.5
        assert sobolev_norm(u, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_non_finite_rejected(self):
        grid = Grid(16, 1.0)
        u = ComplexField(grid, np.full(16, np.nan))
        with pytest.raises(InvalidInputError):
            sobolev_norm(u, 0.0)

    def test_lp_exponent(self):
        with pytest.raises(InvalidInputError):
            lp_norm(gaussian(Grid(16, 4.0)), 0.0)

    def test_lp_of_constant(self):
        grid = Grid(16, 2.0)
        f = RealField(grid, np.full(16, 3.0))
        assert lp_norm(f, 4) == pytest.approx(3.0 * 4.0 ** 0.25)


class TestOperators:
    def test_derivative_of_sine(self):
        grid = Grid(64, math.pi)
        f = RealField.from_function(grid, np.sin)
        df = derivative(f)
        assert isinstance(df, RealField)
        np.testing.assert_allclose(df.values, np.cos(grid.x), atol=1e-12)
        np.testing.assert_allclose(derivative(f, 2).values, -np.sin(grid.x), atol=1e-11)

    def test_dealias_removes_top_third(self):
        grid = Grid(64, math.pi)
        low = ComplexField.from_function(grid, lambda x: np.exp(5j * x))
        high = ComplexField.from_function(grid, lambda x: np.exp(30j * x))
        np.testing.assert_allclose(dealias(low).values, low.values, atol=1e-13)
        np.testing.assert_allclose(dealias(high).values, 0.0, atol=1e-13)

    def test_decay_check(self):
        grid = Grid(256, 8 * math.pi)
        assert decay_check(gaussian(grid)) < 1e-12
        flat = RealField(grid, np.ones(256))
        assert decay_check(flat) == pytest.approx(1.0)
        assert decay_check(RealField.zeros(grid)) == 0.0

    def test_random_band_limited(self, rng):
        grid = Grid(128, 2 * math.pi)
        f = random_band_limited(grid, 5.0, rng, amplitude=0.3)
        assert f.max_abs() == pytest.approx(0.3)
        outside = np.abs(grid.xi) > 5.0
        assert np.max(np.abs(f.spectrum[outside])) < 1e-12


class TestMultiplier:
    def test_symbol_regions(self):
        M = MultiplierSpec(N=10.0, s=0.4)
        xi = np.array([0.0, 5.0, -10.0, 20.0, 30.0, -45.0])
        m = M.symbol(xi)
        np.testing.assert_allclose(m[:3], 1.0)
        np.testing.assert_allclose(m[3:], 10.0 ** 0.6 * np.abs(xi[3:]) ** -0.6, rtol=1e-12)

    def test_symbol_is_monotone_and_continuous(self):
        M = MultiplierSpec(N=16.0, s=0.3)
        xi = np.linspace(0.0, 100.0, 20001)
        m = M.symbol(xi)
        assert np.all(np.diff(m) <= 1e-14)
        assert np.max(np.abs(np.diff(m))) < 1e-3

    def test_symbol_is_even(self):
        M = MultiplierSpec(N=4.0, s=0.5)
        xi = np.linspace(0.0, 20.0, 101)
        np.testing.assert_array_equal(M.symbol(xi), M.symbol(-xi))

    @pytest.mark.parametrize('N, s', [(1.0, 0.5), (4.0, 1.0), (float('nan'), 0.0)])
    def test_invalid(self, N, s):
        with pytest.raises(InvalidInputError):
            MultiplierSpec(N, s)

    def test_identity_on_grid(self, rng):
        grid = Grid(64, 2.0)
        u = random_band_limited(grid, 100.0, rng)
        Iu = apply_multiplier(u, MultiplierSpec.identity_on(grid))
        np.testing.assert_allclose(Iu.values, u.values, atol=1e-14)

    @pytest.mark.parametrize('N', [16.0, 64.0])
    def test_equivalence_ratios(self, N):
        grid = Grid(1024, 4 * math.pi)
        M = MultiplierSpec(N, 0.6)
        rng = np.random.default_rng(int(N))
        for _ in range(200):
            f = random_band_limited(grid, 128.0, rng)
            lower, upper = multiplier_equivalence_check(f, M)
            assert lower >= 1.0
            assert upper <= 2.0

    def test_equivalence_zero_field(self):
        grid = Grid(32, 1.0)
        with pytest.raises(UndefinedRatioError):
            multiplier_equivalence_check(ComplexField.zeros(grid), MultiplierSpec(4.0, 0.5))

    def test_equivalence_needs_nonnegative_s(self, rng):
        grid = Grid(32, 1.0)
        with pytest.raises(InvalidInputError):
            multiplier_equivalence_check(random_band_limited(grid, 5.0, rng), MultiplierSpec(4.0, -0.5))


class TestCutoff:
    def test_values(self):
        t = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
        np.testing.assert_allclose(psi(t), [1, 1, 1, math.exp(-1.0 / 3.0), 0, 0])

    def test_even_and_bounded(self):
        t = np.linspace(-3, 3, 601)
        np.testing.assert_array_equal(psi(t), psi(-t))
        assert np.all((psi(t) >= 0) & (psi(t) <= 1))


class TestSpaceTime:
    def test_nt_must_be_power_of_two(self):
        grid = Grid(8, 1.0)
        with pytest.raises(ResolutionError):
            SpaceTimeField(grid, 12, 0.1, np.zeros((8, 12)))

    def test_time_lattice(self):
        grid = Grid(8, 1.0)
        F = SpaceTimeField(grid, 16, 0.25, np.zeros((8, 16)))
        assert F.times[8] == 0.0
        assert F.times[0] == -2.0
        assert F.times[-1] == 1.75

    def test_time_reversed(self):
        grid = Grid(8, 1.0)
        F = SpaceTimeField.from_function(grid, 16, 0.1, lambda x, t: t + 0 * x)
        R = F.time_reversed()
        np.testing.assert_allclose(R.values[:, 1:].real, -F.values[:, 1:].real)
        np.testing.assert_array_equal(R.values[:, 0], F.values[:, 0])

    def test_l2_matches_xsb_with_zero_weights(self, rng):
        grid = Grid(16, math.pi)
        values = rng.standard_normal((16, 64)) + 1j * rng.standard_normal((16, 64))
        F = SpaceTimeField(grid, 64, 0.1, values)
        assert xsb_norm(F, NormSpec(0.0, 0.0)) == pytest.approx(F.l2_norm(), rel=1e-10)

    def test_free_wave_sits_on_its_dispersion_surface(self):
        grid = Grid(16, math.pi)
        F = SpaceTimeField.from_function(grid, 256, 0.05,
                                         lambda x, t: np.exp(1j * (2 * x - 4 * t)))
        F = apply_window(F, 2.0)
        base = xsb_norm(F, NormSpec(0.0, 0.0))
        on = xsb_norm(F, NormSpec(0.0, 0.5, Dispersion.SCHRODINGER)) / base
        off = xsb_norm(F, NormSpec(0.0, 0.5, Dispersion.SCHRODINGER_CONJUGATE)) / base
        assert on < 1.5
        assert off == pytest.approx(65 ** 0.25, rel=2e-2)

    def test_airy_wave_norm_is_the_cutoff_moment(self):
        # on the surface the b = 1 weight is 1 + tau^2 against |psi_hat|^2,
        # i.e. ||psi||^2 + ||psi'||^2 in time
        grid = Grid(16, math.pi)
        delta = 2.0
        F = SpaceTimeField.from_function(grid, 256, 0.05,
                                         lambda x, t: np.exp(1j * (2 * x + 8 * t)))
        F = apply_window(F, delta)
        ratio = xsb_norm(F, NormSpec(1.0, 1.0, Dispersion.AIRY)) / xsb_norm(F, NormSpec(0.0, 0.0))

        t = np.linspace(-2 * delta, 2 * delta, 40001)
        w = psi(t / delta)
        moment = trapezoid(np.gradient(w, t) ** 2, t) / trapezoid(w ** 2, t)
        assert ratio == pytest.approx(math.sqrt(5.0 * (1.0 + moment)), rel=2e-2)

    def test_xsb_needs_time_samples(self):
        grid = Grid(8, 1.0)
        F = SpaceTimeField(grid, 4, 0.1, np.ones((8, 4)))
        with pytest.raises(ResolutionError):
            xsb_norm(F, NormSpec(0.0, 0.5))

    def test_window_bounds(self):
        grid = Grid(8, 1.0)
        F = SpaceTimeField(grid, 64, 0.1, np.ones((8, 64)))
        with pytest.raises(WindowError):
            apply_window(F, 0.0)
        with pytest.raises(WindowError):
            apply_window(F, 2.0)
        W = apply_window(F, 1.0)
        assert W.window == 1.0
        np.testing.assert_allclose(W.values[:, 32], 1.0)
        np.testing.assert_allclose(W.values[:, 0], 0.0)
