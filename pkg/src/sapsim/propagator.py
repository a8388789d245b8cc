"""Real-time propagation of the 1D GPE under the barrier schedule.

The production path is split-step Fourier (Strang splitting, see
kernel.py); `cn_step` is an independent Crank-Nicolson finite-difference
integrator kept solely as a cross-check oracle, so the two routes never
share discretization machinery.

Propagation streams: observables are recorded every `snapshot_stride`
steps and density/current frames every `velocity_stride` steps are
handed to an optional consumer (the trajectory integrator) window by
window, so the full frame history is never held in memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .grid import ConfigurationError, Grid, Wavefunction
from .kernel import NumpyKernel, make_kernel
from .potential import PotentialParams, schedule_snapshot

__all__ = [
    "PropagationConfig",
    "RunRecord",
    "PropagationError",
    "step",
    "propagate",
    "cn_step",
]

MAX_HALF_STEP_PHASE = 1.5  # rad; accuracy bound on dt * V_max / 2


class PropagationError(RuntimeError):
    """Non-finite amplitudes or solver failure during propagation."""


@dataclass(frozen=True)
class PropagationConfig:
    dt: float = 5e-4
    t_start: float = 0.0
    t_end: float = 0.0
    snapshot_stride: int = 100
    velocity_stride: int = 10
    g: float = 0.0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.snapshot_stride < 1 or self.velocity_stride < 1:
            raise ConfigurationError("strides must be >= 1")
        if self.snapshot_stride % self.velocity_stride != 0:
            raise ConfigurationError("snapshot_stride must be a multiple of velocity_stride")

    def validate_against(self, p: PotentialParams) -> None:
        if 0.5 * self.dt * p.v_max > MAX_HALF_STEP_PHASE:
            raise ConfigurationError(
                f"dt={self.dt} too large: potential half-step phase "
                f"{0.5 * self.dt * p.v_max:.3g} rad exceeds {MAX_HALF_STEP_PHASE}"
            )


@dataclass
class RunRecord:
    """Observable time series and node-track inputs for one propagation.

    Full wavefunctions are kept only at the requested `store_times`;
    density/current profiles are kept per snapshot frame but only on the
    middle region (plus a small margin) needed for node tracking.
    """

    grid: Grid
    params: PotentialParams
    config: PropagationConfig
    mid_slice: slice
    times: list = field(default_factory=list)
    pops: list = field(default_factory=list)  # (P_L, P_M, P_R) per frame
    mean_x: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    j_integral: list = field(default_factory=list)
    rho_mid: list = field(default_factory=list)
    j_mid: list = field(default_factory=list)
    psi_frames: dict = field(default_factory=dict)  # time -> complex array
    final_psi: Wavefunction | None = None

    def as_arrays(self):
        return (
            np.asarray(self.times),
            np.asarray(self.pops),
            np.asarray(self.mean_x),
            np.asarray(self.norms),
        )

    @property
    def mid_x(self) -> np.ndarray:
        return self.grid.x[self.mid_slice]


def step(psi: Wavefunction, t: float, cfg: PropagationConfig, p: PotentialParams) -> Wavefunction:
    """One Strang split step dt: half potential, full kinetic, half potential.

    Both potential half steps use V(x, t + dt/2); the closing half uses
    the post-kinetic density in the nonlinear phase.
    """
    kern = NumpyKernel(psi.grid, cfg.dt, p, cfg.g)
    out = kern.step(psi.values, t)
    if not np.all(np.isfinite(out.view(float))):
        raise PropagationError(f"non-finite amplitudes after step at t={t}")
    return Wavefunction(psi.grid, out, t + cfg.dt)


def _mid_slice(grid: Grid, x0: float, margin: int = 4) -> slice:
    # Twice the barrier offset: wide enough that the tracked density
    # minimum stays inside the stored slice for its whole excursion.
    idx = np.nonzero(np.abs(grid.x) < 2.0 * x0)[0]
    lo = max(int(idx[0]) - margin, 0)
    hi = min(int(idx[-1]) + 1 + margin, grid.n_points)
    return slice(lo, hi)


def propagate(
    psi0: Wavefunction,
    cfg: PropagationConfig,
    p: PotentialParams,
    *,
    consumer=None,
    store_times: list[float] | None = None,
    compiled: bool | None = None,
) -> RunRecord:
    """Propagate psi0 from t_start to t_end, streaming frames.

    `consumer.consume(t0, dt_frame, rho_frames, j_frames)` is called for
    each window of `snapshot_stride` steps with density/current frames
    spaced `velocity_stride` steps (first frame at t0).  Frame arrays are
    owned by the consumer after the call.
    """
    cfg.validate_against(p)
    grid = psi0.grid
    n_steps = int(round((cfg.t_end - cfg.t_start) / cfg.dt))
    if not np.isclose(cfg.t_start + n_steps * cfg.dt, cfg.t_end, atol=1e-9):
        raise ConfigurationError("t_end - t_start must be a whole number of steps")

    kern = make_kernel(grid, cfg.dt, p, cfg.g, compiled=compiled)
    record = RunRecord(grid=grid, params=p, config=cfg, mid_slice=_mid_slice(grid, p.x0))
    wanted = sorted(store_times) if store_times else []

    psi = psi0.values.copy()
    dx = grid.dx
    x = grid.x
    left = x < -p.x0
    right = x > p.x0
    mid = ~(left | right)
    dt_frame = cfg.velocity_stride * cfg.dt

    def snapshot(t, rho, j):
        record.times.append(t)
        record.pops.append(
            (rho[left].sum() * dx, rho[mid].sum() * dx, rho[right].sum() * dx)
        )
        nrm = rho.sum() * dx
        record.norms.append(nrm)
        record.mean_x.append(float((x * rho).sum() * dx / nrm))
        record.j_integral.append(float(j.sum() * dx))
        record.rho_mid.append(rho[record.mid_slice].copy())
        record.j_mid.append(j[record.mid_slice].copy())

    rho0, j0 = _frame_observables(psi, grid)
    snapshot(cfg.t_start, rho0, j0)

    done = 0
    while done < n_steps:
        block = min(cfg.snapshot_stride, n_steps - done)
        # keep frame spacing uniform: shrink the last block to a
        # multiple of velocity_stride plus a remainder handled stepwise
        vs = cfg.velocity_stride
        t0 = cfg.t_start + done * cfg.dt
        if block % vs == 0:
            psi, rho_f, j_f = kern.record(psi, t0, block, vs)
        else:
            whole = (block // vs) * vs
            if whole:
                psi, rho_f, j_f = kern.record(psi, t0, whole, vs)
            else:
                rho_f, j_f = None, None
            psi = kern.segment(psi, t0 + whole * cfg.dt, block - whole)
            tail_rho, tail_j = _frame_observables(psi, grid)
            if rho_f is None:
                rho_f = np.stack([tail_rho] * 2)
                j_f = np.stack([tail_j] * 2)
            else:
                rho_f = np.vstack([rho_f, tail_rho[None]])
                j_f = np.vstack([j_f, tail_j[None]])
        done += block
        t1 = cfg.t_start + done * cfg.dt
        if not np.isfinite(psi[0]) or not np.isfinite(abs(psi).sum()):
            raise PropagationError(f"non-finite amplitudes at step {done}")
        if consumer is not None:
            consumer.consume(t0, dt_frame, rho_f, j_f)
        snapshot(t1, rho_f[-1], j_f[-1])
        while wanted and wanted[0] <= t1 + 0.5 * cfg.dt:
            record.psi_frames[wanted.pop(0)] = psi.copy()

    record.final_psi = Wavefunction(grid, psi.copy(), cfg.t_end)
    return record


def _frame_observables(psi: np.ndarray, grid: Grid):
    dpsi = np.fft.ifft(1j * grid.k * np.fft.fft(psi))
    return np.abs(psi) ** 2, np.imag(np.conj(psi) * dpsi)


# ---------------------------------------------------------------------------
# Crank-Nicolson oracle
# ---------------------------------------------------------------------------

def cn_step(psi: Wavefunction, t: float, cfg: PropagationConfig, p: PotentialParams) -> Wavefunction:
    """Crank-Nicolson step: (1 + i dt/2 H) psi' = (1 - i dt/2 H) psi.

    H uses the compact fourth-order (Numerov) tridiagonal discretization
    of the kinetic term and V(x, t + dt/2); the nonlinear density is
    handled with a predictor-corrector pass.  Unconditionally stable and
    exactly norm-preserving for g = 0 (Cayley form of a Hermitian H).
    """
    grid = psi.grid
    dt = cfg.dt
    v = schedule_snapshot(t + 0.5 * dt, p, grid)

    def solve(dens):
        return _cn_solve(psi.values, v + cfg.g * dens, dt, grid)

    rho = np.abs(psi.values) ** 2
    if cfg.g == 0.0:
        out = solve(rho)
    else:
        pred = solve(rho)
        out = solve(0.5 * (rho + np.abs(pred) ** 2))
    if not np.all(np.isfinite(out.view(float))):
        raise PropagationError(f"non-finite amplitudes in cn_step at t={t}")
    return Wavefunction(grid, out, t + dt)


def _cn_solve(psi: np.ndarray, v: np.ndarray, dt: float, grid: Grid) -> np.ndarray:
    """One Cayley solve with Numerov-corrected tridiagonal operators.

    Numerov: -psi''/2 ~ T psi with (1 + dx^2/12 D2) on both sides, i.e.
    solve (M + i dt/2 (K + M V)) psi' = (M - i dt/2 (K + M V)) psi where
    M is the tridiagonal Numerov mass matrix and K the standard three
    point -1/2 D2.  Dirichlet ends (amplitude is ~0 at the box edges).
    """
    n = grid.n_points
    dx2 = grid.dx**2
    # tridiagonal templates: (off, diag)
    k_diag = 1.0 / dx2 * np.ones(n)
    k_off = -0.5 / dx2 * np.ones(n - 1)
    m_diag = (10.0 / 12.0) * np.ones(n)
    m_off = (1.0 / 12.0) * np.ones(n - 1)

    # H_eff = K + M V  (tridiagonal since M and diag(V) are)
    h_diag = k_diag + m_diag * v
    h_up = k_off + m_off * v[1:]    # row i, col i+1 uses V_{i+1}
    h_lo = k_off + m_off * v[:-1]   # row i+1, col i uses V_i

    z = 0.5j * dt
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = m_off + z * h_up
    ab[1, :] = m_diag + z * h_diag
    ab[2, :-1] = m_off + z * h_lo

    rhs = (m_diag - z * h_diag) * psi
    rhs[:-1] += (m_off - z * h_up) * psi[1:]
    rhs[1:] += (m_off - z * h_lo) * psi[:-1]
    return scipy.linalg.solve_banded((1, 1), ab, rhs)
