import math
import warnings

import numpy as np
import pytest

from errors import BlowUpError, InvalidInputError, StabilityWarning
from invariants import mass
from propagators import (SolverConfig, SystemParams, SystemState, evolve, gaussian_data,
                         linear_propagate, load_state, save_state, step)
from spectral import ComplexField, Dispersion, Grid, RealField, random_band_limited, sobolev_norm


@pytest.fixture
def small_grid():
    return Grid(128, 8 * math.pi)


def max_diff(a, b):
    return float(np.max(np.abs(a.values - b.values)))


class TestParams:
    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            SystemParams(alpha=float('nan'))

    def test_coupling_sign(self):
        SystemParams(alpha=2.0, gamma=0.5).require_positive_coupling()
        with pytest.raises(InvalidInputError):
            SystemParams(alpha=-1.0, gamma=1.0).require_positive_coupling()

    def test_state_grid_mismatch(self):
        u = ComplexField.zeros(Grid(16, 1.0))
        v = RealField.zeros(Grid(32, 1.0))
        with pytest.raises(InvalidInputError):
            SystemState(u, v)

    def test_solver_config(self):
        with pytest.raises(InvalidInputError):
            SolverConfig(dt=0.0)
        with pytest.raises(InvalidInputError):
            SolverConfig(record_every=0)


class TestLinear:
    def test_unitary(self, rng, small_grid):
        u = random_band_limited(small_grid, 5.0, rng)
        for dispersion in Dispersion:
            out = linear_propagate(u, 0.7, dispersion)
            assert sobolev_norm(out, 0.5) == pytest.approx(sobolev_norm(u, 0.5), rel=1e-12)

    def test_group_property(self, rng, small_grid):
        u = random_band_limited(small_grid, 5.0, rng)
        two_steps = linear_propagate(linear_propagate(u, 0.3, 'schrodinger'), 0.5, 'schrodinger')
        one_step = linear_propagate(u, 0.8, 'schrodinger')
        assert max_diff(two_steps, one_step) < 1e-12

    def test_airy_keeps_real_fields_real(self, rng, small_grid):
        v = random_band_limited(small_grid, 5.0, rng, real=True)
        assert isinstance(linear_propagate(v, 1.0, Dispersion.AIRY), RealField)
        assert isinstance(linear_propagate(v, 1.0, Dispersion.SCHRODINGER), ComplexField)

    def test_evolve_without_coupling_is_linear(self, small_grid):
        state = gaussian_data(small_grid, 1.0, 0.0, width=2.0, wavenumber=1.0)
        p = SystemParams(alpha=0.0, beta=0.0, gamma=0.0)
        final = evolve(state, 0.5, SolverConfig(dt=1e-2), p).final
        expected = linear_propagate(state.u, 0.5, Dispersion.SCHRODINGER)
        assert max_diff(final.u, expected) < 1e-10
        assert final.v.max_abs() == 0.0


class TestExactSolutions:
    def test_plane_wave(self):
        grid = Grid(64, math.pi)
        A, k, T = 0.5, 3.0, 1.0
        p = SystemParams()
        state = SystemState(ComplexField.from_function(grid, lambda x: A * np.exp(1j * k * x)),
                            RealField.zeros(grid))
        final = evolve(state, T, SolverConfig(dt=1e-3), p).final
        omega = k * k + p.beta * A * A
        expected = A * np.exp(1j * (k * grid.x - omega * T))
        assert np.max(np.abs(final.u.values - expected)) < 1e-10
        assert final.v.max_abs() < 1e-12

    def test_kdv_soliton(self):
        grid = Grid(1024, 32 * math.pi)
        c, T = 1.0, 1.0

        def soliton(t):
            return 3.0 * c / np.cosh(math.sqrt(c) * (grid.x - c * t) / 2.0) ** 2

        state = SystemState(ComplexField.zeros(grid), RealField(grid, soliton(0.0)))
        final = evolve(state, T, SolverConfig(dt=1e-3), SystemParams()).final
        assert np.max(np.abs(final.v.values - soliton(T))) < 1e-8
        assert final.u.max_abs() == 0.0

    @pytest.mark.parametrize('theta', [0.7, math.pi])
    def test_phase_rotation_commutes_with_the_flow(self, small_grid, theta):
        state = gaussian_data(small_grid, 1.0, 1.0, width=2.0, wavenumber=1.0)
        rotated = SystemState(ComplexField(small_grid, np.exp(1j * theta) * state.u.values), state.v)
        cfg, p = SolverConfig(dt=1e-3), SystemParams()
        a = evolve(state, 0.2, cfg, p).final
        b = evolve(rotated, 0.2, cfg, p).final
        assert np.max(np.abs(b.u.values - np.exp(1j * theta) * a.u.values)) < 1e-11
        assert max_diff(b.v, a.v) < 1e-11


class TestEvolve:
    def test_mass_is_conserved(self, small_grid):
        state = gaussian_data(small_grid)
        p = SystemParams()
        traj = evolve(state, 0.5, SolverConfig(dt=1e-3, record_every=50), p,
                      observers={'mass': lambda st: mass(st.u)})
        m = np.array(traj.observers['mass'])
        assert np.max(np.abs(m - m[0])) / m[0] < 1e-8
        assert traj.max_imag_residue < 1e-10

    @pytest.mark.slow
    def test_mass_conservation_at_acceptance_scale(self):
        state = gaussian_data(Grid(512, 32 * math.pi))
        traj = evolve(state, 5.0, SolverConfig(dt=1e-3, record_every=500), SystemParams(),
                      observers={'mass': lambda st: mass(st.u)})
        m = np.array(traj.observers['mass'])
        assert np.max(np.abs(m - m[0])) / m[0] < 1e-8

    def test_fourth_order(self):
        grid = Grid(64, 8 * math.pi)
        state = gaussian_data(grid, 1.0, 1.0, width=2.0)
        p = SystemParams()
        dt = 0.05
        reference = evolve(state, 1.0, SolverConfig(dt=dt / 8), p).final
        errors = [max_diff(evolve(state, 1.0, SolverConfig(dt=h), p).final.u, reference.u)
                  for h in (dt, dt / 2)]
        assert 12.0 <= errors[0] / errors[1] <= 20.0

    def test_step_matches_single_evolve_step(self, small_grid):
        state = gaussian_data(small_grid)
        cfg = SolverConfig(dt=1e-2)
        p = SystemParams()
        one = step(state, cfg, p)
        traj = evolve(state, 1e-2, cfg, p)
        assert one.t == pytest.approx(1e-2)
        assert max_diff(one.u, traj.final.u) < 1e-14
        assert max_diff(one.v, traj.final.v) < 1e-14

    def test_recording_and_remainder(self, small_grid):
        state = gaussian_data(small_grid)
        traj = evolve(state, 0.0105, SolverConfig(dt=1e-3, record_every=5), SystemParams())
        np.testing.assert_allclose(traj.times, [0.0, 0.005, 0.010, 0.0105])
        assert list(traj.to_frame().columns) == ['t']

    def test_zero_horizon(self, small_grid):
        traj = evolve(gaussian_data(small_grid), 0.0, SolverConfig(), SystemParams())
        assert traj.times == [0.0]

    def test_negative_horizon(self, small_grid):
        with pytest.raises(InvalidInputError):
            evolve(gaussian_data(small_grid), -1.0, SolverConfig(), SystemParams())

    def test_blow_up_carries_trajectory(self, small_grid):
        u = ComplexField(small_grid, np.full(small_grid.nx, np.nan))
        state = SystemState(u, RealField.zeros(small_grid))
        with pytest.raises(BlowUpError) as info:
            evolve(state, 0.01, SolverConfig(dt=1e-3), SystemParams())
        assert info.value.exit_code == 3
        assert info.value.t == pytest.approx(1e-3)
        assert len(info.value.trajectory.times) == 1
        assert info.value.to_dict()['diagnostics']['finite'] is False

    def test_large_data_blows_up(self):
        grid = Grid(64, 8 * math.pi)
        state = gaussian_data(grid, 1e13, 0.0)
        with pytest.raises(BlowUpError):
            step(state, SolverConfig(dt=1e-3), SystemParams())

    def test_stability_warning(self):
        grid = Grid(256, math.pi)
        state = SystemState(ComplexField.zeros(grid), RealField.zeros(grid))
        with pytest.warns(StabilityWarning):
            step(state, SolverConfig(dt=1e-3), SystemParams())

    def test_no_warning_on_resolved_step(self, small_grid):
        with warnings.catch_warnings():
            warnings.simplefilter('error', StabilityWarning)
            step(gaussian_data(small_grid), SolverConfig(dt=1e-3), SystemParams())


class TestSnapshots:
    @pytest.mark.parametrize('fmt', ['binary', 'csv'])
    def test_round_trip_is_exact(self, tmp_path, rng, fmt):
        grid = Grid(32, 3.0)
        state = SystemState(random_band_limited(grid, 8.0, rng),
                            random_band_limited(grid, 8.0, rng, real=True), t=0.125)
        p = SystemParams(alpha=0.5, beta=-1.0, gamma=2.0, s=0.1, l=-0.2)
        path = save_state(state, p, tmp_path / f'state.{fmt}', fmt=fmt)
        loaded, loaded_p = load_state(path)
        np.testing.assert_array_equal(loaded.u.values, state.u.values)
        np.testing.assert_array_equal(loaded.v.values, state.v.values)
        assert loaded.t == state.t
        assert loaded.grid == grid
        assert loaded_p == p

    def test_binary_header(self, tmp_path, small_grid):
        path = save_state(gaussian_data(small_grid), SystemParams(), tmp_path / 'state.bin')
        assert path.read_bytes().startswith(b'SKDV1\n{')

    def test_unknown_format(self, tmp_path, small_grid):
        with pytest.raises(InvalidInputError):
            save_state(gaussian_data(small_grid), SystemParams(), tmp_path / 'x', fmt='hdf5')

    def test_not_a_snapshot(self, tmp_path):
        path = tmp_path / 'junk.txt'
        path.write_text('hello\n')
        with pytest.raises(InvalidInputError):
            load_state(path)

    def test_truncated_binary(self, tmp_path, small_grid):
        path = save_state(gaussian_data(small_grid), SystemParams(), tmp_path / 'state.bin')
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(InvalidInputError):
            load_state(path)
