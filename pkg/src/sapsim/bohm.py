"""Bohmian trajectory ensemble guided by the propagated wavefunction.

Trajectories integrate dx/dt = v(x, t) with v = J/|psi|^2 sampled on the
streaming density/current frames produced by the propagator.  Velocity
is interpolated cubically in x (Catmull-Rom on the uniform grid) and
linearly in t between frames.  Each trajectory carries its own adaptive
Cash-Karp 4(5) step so the integrator can shrink through the node-region
velocity spike without slowing the rest of the ensemble.

Initial positions are deterministic density quantiles, which removes all
randomness from the pipeline; ensemble statistics are checked against
the wavefunction densities instead of sampling noise bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, Wavefunction

__all__ = [
    "TrajectoryConfig",
    "TrajectoryEnsemble",
    "Crossing",
    "IntegrationError",
    "StiffnessError",
    "sample_initial",
    "detect_crossings",
    "vmax_ensemble",
    "ks_distance",
]

# Cash-Karp 4(5) tableau
_CK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_CK_C = (0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8)
_CK_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
_CK_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)


class IntegrationError(RuntimeError):
    """Trajectory left the grid."""


class StiffnessError(RuntimeError):
    """Adaptive step underflow; the node spike is too stiff for dt_min."""

    def __init__(self, msg, trajectory_index=None, time=None):
        super().__init__(msg)
        self.trajectory_index = trajectory_index
        self.time = time


@dataclass(frozen=True)
class TrajectoryConfig:
    n_traj: int = 1000
    rtol: float = 1e-6
    atol: float = 1e-6
    density_floor: float = 1e-12
    dt_min: float = 1e-12
    # dense-sample capture band beyond |x| = x0; must cover the node's
    # full excursion (the outermost trajectories meet it near |x| = 2 x0)
    sample_margin: float = 0.5


@dataclass(frozen=True)
class Crossing:
    index: int
    time: float
    position: float
    velocity: float


def sample_initial(psi0: Wavefunction, n_traj: int) -> np.ndarray:
    """Quantile points of |psi0|^2: CDF(x_k) = (k - 1/2)/n_traj."""
    if n_traj < 2:
        raise ValueError("need at least 2 trajectories")
    if abs(psi0.norm - 1.0) > 1e-6:
        raise ValueError(f"psi0 not normalized: norm = {psi0.norm}")
    rho = np.abs(psi0.values) ** 2
    # midpoint cumulative sum: CDF value centered on x_i, not its right edge
    cdf = (np.cumsum(rho) - 0.5 * rho) * psi0.grid.dx
    cdf = cdf / cdf.max()
    # keep a strictly increasing branch for the monotone inverse
    keep = np.concatenate(([True], np.diff(cdf) > 1e-300))
    q = (np.arange(n_traj) + 0.5) / n_traj
    xs = np.interp(q, cdf[keep], psi0.grid.x[keep])
    return xs


class _WindowField:
    """v(x, t) over one frame window: cubic in x, linear in t."""

    def __init__(self, grid: Grid, t0, dt_frame, rho_f, j_f, floor):
        self.grid = grid
        self.t0 = t0
        self.dt_frame = dt_frame
        self.n_frames = rho_f.shape[0]
        valid = rho_f > floor
        self.v = np.where(valid, j_f / np.where(valid, rho_f, 1.0), 0.0)
        self.v_flat = np.ascontiguousarray(self.v).ravel()
        self.t_end = t0 + (self.n_frames - 1) * dt_frame

    def __call__(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        g = self.grid
        u = (x - g.x_min) / g.dx
        i = np.clip(u.astype(np.int64), 1, g.n_points - 3)
        f = u - i
        f2 = f * f
        f3 = f2 * f
        w0 = -0.5 * f3 + f2 - 0.5 * f
        w1 = 1.5 * f3 - 2.5 * f2 + 1.0
        w2 = -1.5 * f3 + 2.0 * f2 + 0.5 * f
        w3 = 0.5 * f3 - 0.5 * f2
        s = np.clip((t - self.t0) / self.dt_frame, 0.0, self.n_frames - 1 - 1e-12)
        fi = s.astype(np.int64)
        a = s - fi
        # gather only the 4-point stencil from the flat frame buffer
        base = fi * g.n_points + i
        vf = self.v_flat
        def interp(b):
            return w0 * vf[b - 1] + w1 * vf[b] + w2 * vf[b + 1] + w3 * vf[b + 2]
        return (1.0 - a) * interp(base) + a * interp(base + g.n_points)


class TrajectoryEnsemble:
    """Mutable ensemble state; fed frame windows via `consume`."""

    def __init__(
        self,
        grid: Grid,
        x_init: np.ndarray,
        t0: float,
        cfg: TrajectoryConfig,
        x0: float,
        history_stride: int = 10,
    ):
        self.grid = grid
        self.cfg = cfg
        self.x0 = x0
        self.x = np.asarray(x_init, dtype=float).copy()
        self.t = t0
        self.n = self.x.shape[0]
        self._h = np.full(self.n, 1e-3)
        self.history_stride = history_stride
        self._windows = 0
        # per-window scalar diagnostics (aligned with snapshot frames > t0)
        self.frame_times: list[float] = []
        self.ks: list[float] = []
        self.mean_velocity: list[float] = []
        # downsampled full ensemble history for figure output
        self.times: list[float] = [t0]
        self.positions: list[np.ndarray] = [self.x.copy()]
        self.velocities: list[np.ndarray] = [np.zeros(self.n)]
        # dense samples near the middle region, per accepted step
        self._dense: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        self.min_step = np.inf
        self.order_violations = 0

    # -- streaming consumer interface ------------------------------------

    def consume(self, t0: float, dt_frame: float, rho_f: np.ndarray, j_f: np.ndarray) -> None:
        field = _WindowField(self.grid, t0, dt_frame, rho_f, j_f, self.cfg.density_floor)
        self._advance(field)
        v_now = field(self.x, np.full(self.n, field.t_end))
        self._windows += 1
        self.frame_times.append(field.t_end)
        self.ks.append(ks_distance(self.x, rho_f[-1], self.grid))
        self.mean_velocity.append(float(v_now.mean()))
        self.order_violations += int(np.sum(np.diff(self.x) < 0))
        if self._windows % self.history_stride == 0:
            self.times.append(field.t_end)
            self.positions.append(self.x.copy())
            self.velocities.append(v_now)

    # -- integration ------------------------------------------------------

    def _advance(self, field: _WindowField) -> None:
        cfg = self.cfg
        t_end = field.t_end
        t = np.full(self.n, self.t)
        x = self.x
        h = self._h
        band = self.x0 + cfg.sample_margin
        guard = 0
        max_iter = 2_000_000
        while True:
            act = np.nonzero(t < t_end - 1e-15)[0]
            if act.size == 0:
                break
            guard += 1
            if guard > max_iter:
                raise IntegrationError("trajectory advance did not finish (iteration cap)")
            ha = np.minimum(h[act], t_end - t[act])
            xa, ta = x[act], t[act]
            ks = np.empty((6, act.size))
            ks[0] = field(xa, ta)
            for s in range(1, 6):
                xi = xa + ha * sum(_CK_A[s][j] * ks[j] for j in range(s))
                ks[s] = field(xi, ta + _CK_C[s] * ha)
            x5 = xa + ha * sum(_CK_B5[j] * ks[j] for j in range(6))
            x4 = xa + ha * sum(_CK_B4[j] * ks[j] for j in range(6))
            err = np.abs(x5 - x4)
            tol = cfg.atol + cfg.rtol * np.maximum(np.abs(xa), np.abs(x5))
            ok = err <= tol
            # step-size update (PI-free classic controller)
            with np.errstate(divide="ignore"):
                fac = 0.9 * (tol / np.where(err > 0, err, 1e-300)) ** 0.2
            h[act] = ha * np.clip(fac, 0.2, 5.0)
            self.min_step = min(self.min_step, float(ha[ok].min()) if ok.any() else self.min_step)
            if np.any(h[act] < cfg.dt_min):
                k_bad = act[np.argmin(h[act])]
                raise StiffnessError(
                    f"step underflow below {cfg.dt_min} for trajectory {k_bad} at t={t[k_bad]}",
                    trajectory_index=int(k_bad),
                    time=float(t[k_bad]),
                )
            acc = act[ok]
            if acc.size:
                x[acc] = x5[ok]
                t[acc] = ta[ok] + ha[ok]
                if np.any(np.abs(x[acc]) > self.grid.x_max):
                    raise IntegrationError("trajectory left the grid")
                near = acc[np.abs(x[acc]) < band]
                if near.size:
                    tn = t[near]
                    self._dense.append(
                        (near.copy(), tn.copy(), x[near].copy(), field(x[near], tn))
                    )
        self.t = t_end
        self._h = h

    # -- results ----------------------------------------------------------

    def dense_samples(self):
        """Per-trajectory (t, x, v) samples captured near the middle region."""
        out = [([], [], []) for _ in range(self.n)]
        for idxs, ts, xs, vs in self._dense:
            for k, tt, xx, vv in zip(idxs, ts, xs, vs):
                out[k][0].append(tt)
                out[k][1].append(xx)
                out[k][2].append(vv)
        return [tuple(np.asarray(a) for a in rec) for rec in out]

    def history(self):
        return (
            np.asarray(self.times),
            np.stack(self.positions, axis=0),
            np.stack(self.velocities, axis=0),
        )

    def check_order(self) -> int:
        """Order violations seen so far (checked at every window end)."""
        return self.order_violations


def detect_crossings(ensemble: TrajectoryEnsemble, track_times: np.ndarray, track_x: np.ndarray):
    """Sign-change times of x_k(t) - x^n(t) on the dense samples.

    Returns (crossings, missing): one Crossing per trajectory that
    traverses the node, indices of trajectories that never cross.
    """
    crossings: list[Crossing] = []
    missing: list[int] = []
    for k, (ts, xs, vs) in enumerate(ensemble.dense_samples()):
        if ts.size < 2:
            missing.append(k)
            continue
        order = np.argsort(ts)
        ts, xs, vs = ts[order], xs[order], vs[order]
        inside = (ts >= track_times[0]) & (ts <= track_times[-1])
        if inside.sum() < 2:
            missing.append(k)
            continue
        ts, xs, vs = ts[inside], xs[inside], vs[inside]
        d = xs - np.interp(ts, track_times, track_x)
        sign = np.sign(d)
        hits = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        if hits.size == 0:
            exact = np.nonzero(d == 0.0)[0]
            if exact.size:
                i = exact[0]
                crossings.append(Crossing(k, float(ts[i]), float(xs[i]), float(vs[i])))
            else:
                missing.append(k)
            continue
        i = int(hits[0])
        # linear interpolants of both curves between the bracketing samples
        w = d[i] / (d[i] - d[i + 1])
        t_n = float(ts[i] + w * (ts[i + 1] - ts[i]))
        x_n = float(xs[i] + w * (xs[i + 1] - xs[i]))
        v_n = float(vs[i] + w * (vs[i + 1] - vs[i]))
        # the velocity peaks at the node itself: the density dip is
        # parabolic in (x - x^n), so 1/v is quadratic in the signed
        # distance and the bracketing pair determines the peak value;
        # linear interpolation across the peak would bias it low
        if vs[i] > 0.0 and vs[i + 1] > 0.0 and d[i] ** 2 != d[i + 1] ** 2:
            b = (1.0 / vs[i + 1] - 1.0 / vs[i]) / (d[i + 1] ** 2 - d[i] ** 2)
            a = 1.0 / vs[i] - b * d[i] ** 2
            # a -> 0+ means the two-point fit is ill-conditioned (nearly
            # symmetric bracket); cap the peak at 5x the larger sample
            if b >= 0.0 and a * 5.0 * max(vs[i], vs[i + 1]) > 1.0:
                v_n = float(1.0 / a)
        crossings.append(Crossing(k, t_n, x_n, v_n))
    return crossings, missing


def vmax_ensemble(crossings) -> float:
    """Mean crossing velocity, Eq.-of-motion route."""
    if not crossings:
        raise ValueError("no crossings recorded")
    return float(np.mean([c.velocity for c in crossings]))


def ks_distance(positions: np.ndarray, rho: np.ndarray, grid: Grid) -> float:
    """Kolmogorov-Smirnov distance of the ensemble to the density CDF."""
    cdf = (np.cumsum(rho) - 0.5 * rho) * grid.dx
    cdf /= cdf.max()
    xs = np.sort(positions)
    n = xs.shape[0]
    f = np.interp(xs, grid.x, cdf)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))
