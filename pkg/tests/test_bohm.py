import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gaussian_state
from sapsim.bohm import (
    Crossing,
    IntegrationError,
    TrajectoryConfig,
    TrajectoryEnsemble,
    detect_crossings,
    ks_distance,
    sample_initial,
    vmax_ensemble,
)
from sapsim.grid import density, make_grid
from sapsim.kernel import NumpyKernel
from sapsim.propagator import PropagationConfig, propagate
from sapsim.stationary import ground_state


class TestSampleInitial:
    def test_gaussian_quartiles(self, grid):
        psi = gaussian_state(grid)  # |psi|^2 has std 1/sqrt(2)
        xs = sample_initial(psi, 2)
        assert xs[0] == pytest.approx(-0.6745 / np.sqrt(2), abs=1e-3)
        assert xs[1] == pytest.approx(+0.6745 / np.sqrt(2), abs=1e-3)

    def test_symmetric_density_symmetric_samples(self, grid):
        xs = sample_initial(gaussian_state(grid), 101)
        assert np.allclose(xs, -xs[::-1], atol=1e-9)

    @given(n=st.integers(10, 400), center=st.floats(-2.0, 2.0),
           width=st.floats(0.4, 1.5))
    @settings(max_examples=25, deadline=None)
    def test_samples_match_density(self, n, center, width):
        g = make_grid(-12.0, 12.0, 1024)
        psi = gaussian_state(g, center=center, width=width)
        xs = sample_initial(psi, n)
        assert np.all(np.diff(xs) > 0)
        assert ks_distance(xs, density(psi), g) < 2.0 / np.sqrt(n)

    def test_rejects_unnormalized(self, grid):
        psi = gaussian_state(grid)
        psi.values *= 2.0
        with pytest.raises(ValueError):
            sample_initial(psi, 10)


class TestAdvance:
    def _ensemble(self, grid, psi, n=20, **kw):
        cfg = TrajectoryConfig(n_traj=n, **kw)
        return TrajectoryEnsemble(grid, sample_initial(psi, n), 0.0, cfg, 0.48)

    def test_zero_field_immobile(self, grid):
        psi = gaussian_state(grid)
        ens = self._ensemble(grid, psi)
        x_before = ens.x.copy()
        rho = np.tile(density(psi), (6, 1))
        ens.consume(0.0, 0.005, rho, np.zeros_like(rho))
        assert np.array_equal(ens.x, x_before)
        assert ens.check_order() == 0

    def test_coherent_state_rigid_transport(self, grid, bare_params):
        # harmonic coherent state: v(x, t) = -sin(t), space-independent,
        # so the ensemble translates rigidly and its mean follows <x>(t)
        dt = 5e-4
        psi0 = gaussian_state(grid, center=1.0)
        ens = self._ensemble(grid, psi0, n=30)
        spread0 = ens.x.max() - ens.x.min()
        cfg = PropagationConfig(dt=dt, t_start=0.0, t_end=2.0,
                                snapshot_stride=100, velocity_stride=10)
        propagate(psi0, cfg, bare_params, consumer=ens)
        assert ens.t == pytest.approx(2.0)
        assert ens.x.mean() == pytest.approx(np.cos(2.0), abs=1e-3)
        assert ens.x.max() - ens.x.min() == pytest.approx(spread0, abs=1e-3)
        assert ens.check_order() == 0

    def test_uniform_drift_leaves_grid(self, grid):
        psi = gaussian_state(grid, center=11.0, width=0.3)
        ens = self._ensemble(grid, psi, n=5)
        rho = np.full((6, grid.n_points), 1.0)
        with pytest.raises(IntegrationError):
            ens.consume(0.0, 1.0, rho, 2.0 * rho)  # v = 2 for 5 time units


class TestCrossings:
    class StubEnsemble:
        def __init__(self, samples, n):
            self._samples = samples
            self.n = n

        def dense_samples(self):
            return self._samples

    def test_linear_crossing_refined(self):
        # trajectory x = t - 1 crossing a static node at x = 0 at t = 1
        ts = np.linspace(0.0, 2.0, 21)
        stub = self.StubEnsemble([(ts, ts - 1.0, np.ones_like(ts))], 1)
        crossings, missing = detect_crossings(stub, np.array([0.0, 2.0]),
                                              np.array([0.0, 0.0]))
        assert not missing
        assert crossings[0].time == pytest.approx(1.0, abs=1e-12)
        assert crossings[0].position == pytest.approx(0.0, abs=1e-12)

    def test_peak_velocity_recovered_at_crossing(self):
        # velocity is Lorentzian in the distance to the node (parabolic
        # density dip), sampled off-peak on both sides; the crossing
        # velocity should recover the peak, not the sample average
        w = 0.07
        ts = np.array([0.0, 0.96, 1.05, 2.0])
        xs = ts - 1.0
        vs = 10.0 / (1.0 + (xs / w) ** 2)
        stub = self.StubEnsemble([(ts, xs, vs)], 1)
        crossings, missing = detect_crossings(stub, np.array([0.0, 2.0]),
                                              np.array([0.0, 0.0]))
        assert not missing
        assert crossings[0].velocity == pytest.approx(10.0, rel=1e-9)
        assert max(vs) < 8.0  # both bracketing samples are well below peak

    def test_non_crossing_flagged(self):
        ts = np.linspace(0.0, 2.0, 21)
        stub = self.StubEnsemble(
            [(ts, ts - 1.0, np.ones_like(ts)), (ts, 1.0 + ts, np.ones_like(ts))], 2
        )
        crossings, missing = detect_crossings(stub, np.array([0.0, 2.0]),
                                              np.array([0.0, 0.0]))
        assert len(crossings) == 1
        assert missing == [1]

    def test_vmax_ensemble_mean(self):
        crossings = [Crossing(0, 1.0, 0.0, 3.0), Crossing(1, 1.2, 0.0, 5.0)]
        assert vmax_ensemble(crossings) == 4.0

    def test_vmax_ensemble_empty(self):
        with pytest.raises(ValueError):
            vmax_ensemble([])


class TestKSDistance:
    def test_quantile_samples_minimal_distance(self, grid):
        psi = gaussian_state(grid)
        xs = sample_initial(psi, 500)
        # quantile sampling achieves the lattice bound 1/(2N) + interp error
        assert ks_distance(xs, density(psi), grid) < 2e-3

    def test_shifted_samples_large_distance(self, grid):
        psi = gaussian_state(grid)
        xs = sample_initial(psi, 500) + 2.0
        assert ks_distance(xs, density(psi), grid) > 0.5
