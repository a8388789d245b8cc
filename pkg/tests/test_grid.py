import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gaussian_state
from sapsim.grid import (
    ConfigurationError,
    Wavefunction,
    current,
    density,
    make_grid,
    mean_position,
    energy,
    populations,
    spectral_derivative,
    velocity_field,
)


class TestMakeGrid:
    def test_spacing(self):
        g = make_grid(-12.0, 12.0, 2048)
        assert g.dx == pytest.approx(24.0 / 2048)
        assert g.x[0] == -12.0
        assert g.x.shape == (2048,)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ConfigurationError):
            make_grid(-12.0, 12.0, 1000)

    def test_rejects_empty_extent(self):
        with pytest.raises(ConfigurationError):
            make_grid(0.0, 0.0, 512)

    def test_rejects_too_few_points(self):
        with pytest.raises(ConfigurationError):
            make_grid(-12.0, 12.0, 128)

    def test_wavenumber_range(self):
        g = make_grid(-10.0, 10.0, 512)
        assert g.k.min() >= -np.pi / g.dx
        assert g.k.max() < np.pi / g.dx


class TestDensity:
    def test_harmonic_ground_state_profile(self, grid):
        psi = gaussian_state(grid)
        expect = np.exp(-grid.x**2) / np.sqrt(np.pi)
        assert np.allclose(density(psi), expect, atol=1e-12)

    def test_global_phase_invariance(self, grid):
        psi = gaussian_state(grid, center=0.7)
        rotated = Wavefunction(grid, psi.values * np.exp(1.3j), 0.0)
        assert np.allclose(density(psi), density(rotated), atol=1e-15)

    def test_integrates_to_norm(self, grid):
        psi = gaussian_state(grid, center=-2.0, width=0.5, k=3.0)
        assert np.sum(density(psi)) * grid.dx == pytest.approx(psi.norm, abs=1e-10)


class TestCurrent:
    def test_real_state_zero(self, grid):
        psi = gaussian_state(grid, center=1.0)
        assert np.max(np.abs(current(psi))) < 1e-12

    def test_plane_wave_envelope(self, grid):
        k = 2.0
        psi = gaussian_state(grid, width=2.0, k=k)
        rho = density(psi)
        core = rho > 1e-3 * rho.max()
        assert np.allclose(current(psi)[core], k * rho[core], rtol=1e-6)


class TestVelocityField:
    def test_plane_wave_velocity(self, grid):
        psi = gaussian_state(grid, width=2.0, k=2.0)
        v, valid = velocity_field(psi)
        center = np.abs(grid.x) < 1.0
        assert valid[center].all()
        assert np.allclose(v[center], 2.0, atol=1e-8)

    def test_real_eigenstate_zero_velocity(self, grid):
        psi = gaussian_state(grid)
        v, valid = velocity_field(psi, density_floor=1e-10)
        assert np.max(np.abs(v[valid])) < 1e-8

    def test_marks_low_density_invalid(self, grid):
        psi = gaussian_state(grid, width=0.3)
        _, valid = velocity_field(psi, density_floor=1e-12)
        # tails of a width-0.3 Gaussian are far below floor at |x| ~ 12
        assert not valid[0] and not valid[-1]
        assert valid[grid.n_points // 2]


class TestPopulations:
    def test_symmetric_state_equal_outer(self, grid):
        psi = gaussian_state(grid, width=1.5)
        p_l, p_m, p_r = populations(psi, 0.48)
        assert p_l == pytest.approx(p_r, abs=1e-12)

    def test_x0_outside_grid(self, grid):
        psi = gaussian_state(grid)
        with pytest.raises(ConfigurationError):
            populations(psi, 15.0)

    @given(
        center=st.floats(-3.0, 3.0),
        width=st.floats(0.3, 2.0),
        k=st.floats(-3.0, 3.0),
        x0=st.floats(0.1, 5.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_sum_to_norm(self, center, width, k, x0):
        g = make_grid(-12.0, 12.0, 512)
        psi = gaussian_state(g, center=center, width=width, k=k)
        p_l, p_m, p_r = populations(psi, x0)
        assert min(p_l, p_m, p_r) >= 0.0
        assert p_l + p_m + p_r == pytest.approx(psi.norm, abs=1e-10)


class TestMeanPosition:
    def test_centered_gaussian(self, grid):
        assert mean_position(gaussian_state(grid)) == pytest.approx(0.0, abs=1e-10)

    def test_displaced_gaussian(self, grid):
        assert mean_position(gaussian_state(grid, center=-1.8)) == pytest.approx(
            -1.8, abs=1e-9
        )


class TestSpectralDerivative:
    @given(mode=st.integers(-40, 40))
    @settings(max_examples=30, deadline=None)
    def test_plane_wave_exact(self, mode):
        g = make_grid(-10.0, 10.0, 512)
        k = 2.0 * np.pi * mode / (g.x_max - g.x_min)
        f = np.exp(1j * k * g.x)
        assert np.allclose(spectral_derivative(f, g), 1j * k * f, atol=1e-10)

    def test_gaussian_derivative(self, grid):
        f = np.exp(-grid.x**2).astype(complex)
        assert np.allclose(
            spectral_derivative(f, grid), -2.0 * grid.x * f, atol=1e-10
        )


class TestEnergy:
    def test_harmonic_ground_state(self, grid):
        psi = gaussian_state(grid)
        v = 0.5 * grid.x**2
        assert energy(psi, v) == pytest.approx(0.5, abs=1e-10)

    def test_repulsive_interaction_raises_energy(self, grid):
        psi = gaussian_state(grid)
        v = 0.5 * grid.x**2
        assert energy(psi, v, g=0.5) > energy(psi, v)
