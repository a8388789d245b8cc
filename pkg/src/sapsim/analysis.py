"""Node tracking, transport diagnostics and power-law scaling fits.

The node x^n(t) is an interior local minimum of the probability
density, followed frame to frame by continuity on the recorded
snapshots.  Frames whose stored density slice has no interior local
minimum (the node has left the stored window) are skipped; the current
there is negligible, so skipped frames do not affect the integrated
flux.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Wavefunction, spectral_derivative
from .propagator import RunRecord

__all__ = [
    "NodeTrack",
    "PowerLawFit",
    "track_node",
    "node_flux",
    "vmax_integral",
    "continuity_residuals",
    "quantum_potential",
    "fit_powerlaw",
    "max_mean_velocity",
]

SMOOTH_WINDOW = 11  # frames; node-velocity jitter suppression


@dataclass
class NodeTrack:
    times: np.ndarray
    x_n: np.ndarray
    rho_n: np.ndarray
    j_n: np.ndarray
    xdot_n: np.ndarray
    frame_indices: np.ndarray


@dataclass
class PowerLawFit:
    exponent: float
    amplitude: float
    r_squared: float
    residuals: np.ndarray


def _moving_average(y: np.ndarray, w: int) -> np.ndarray:
    if w <= 1 or y.size < w:
        return y
    pad = w // 2
    yp = np.pad(y, pad, mode="edge")
    return np.convolve(yp, np.ones(w) / w, mode="valid")


def track_node(record: RunRecord) -> NodeTrack:
    """Follow the interior density minimum across the recorded frames.

    Per frame the candidates are the interior local minima of the
    stored density slice; the one nearest the previous node position is
    kept (the deepest one seeds the track).  Frames with no interior
    local minimum are skipped.  The grid minimum is refined by a
    parabola through the three surrounding points.
    """
    times = np.asarray(record.times)
    xm = record.mid_x

    idx_frames, xns, rhons, jns = [], [], [], []
    prev = None
    for fi in range(len(times)):
        rho = record.rho_mid[fi]
        mins = np.nonzero((rho[1:-1] < rho[:-2]) & (rho[1:-1] < rho[2:]))[0] + 1
        if mins.size == 0:
            prev = None
            continue
        if prev is None:
            i_loc = int(mins[np.argmin(rho[mins])])
        else:
            i_loc = int(mins[np.argmin(np.abs(xm[mins] - prev))])
        ym, y0, yp = rho[i_loc - 1], rho[i_loc], rho[i_loc + 1]
        denom = ym - 2.0 * y0 + yp
        shift = 0.5 * (ym - yp) / denom if denom > 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
        dxg = xm[1] - xm[0]
        x_n = xm[i_loc] + shift * dxg
        rho_n = y0 - 0.25 * (ym - yp) * shift
        if not rho_n > 0.0:
            rho_n = max(y0, np.finfo(float).tiny)
        j_n = float(np.interp(x_n, xm, record.j_mid[fi]))
        idx_frames.append(fi)
        xns.append(x_n)
        rhons.append(rho_n)
        jns.append(j_n)
        prev = x_n

    if len(idx_frames) < 3:
        raise ValueError("no usable node-track window (density has no interior minimum)")

    times_n = times[idx_frames]
    x_n = np.asarray(xns)
    xdot = np.gradient(x_n, times_n)
    xdot = _moving_average(xdot, SMOOTH_WINDOW)
    return NodeTrack(
        times=times_n,
        x_n=x_n,
        rho_n=np.asarray(rhons),
        j_n=np.asarray(jns),
        xdot_n=xdot,
        frame_indices=np.asarray(idx_frames),
    )


def node_flux(track: NodeTrack) -> float:
    """Integrated probability flux through the moving node."""
    return float(np.trapezoid(track.j_n, track.times))


def vmax_integral(track: NodeTrack) -> tuple[float, float, float]:
    """Integral route to the mean node-crossing velocity.

    Returns (total, first_term, second_term) of
    int [ J(x^n)^2/|psi(x^n)|^2 - J(x^n) xdot^n ] dt over the track.
    """
    first = float(np.trapezoid(track.j_n**2 / track.rho_n, track.times))
    second = float(np.trapezoid(-track.j_n * track.xdot_n, track.times))
    return first + second, first, second


def continuity_residuals(frames: list[Wavefunction]) -> np.ndarray:
    """L2 residual of d|psi|^2/dt + d(J)/dx per consecutive frame pair.

    The time derivative is a centered difference between the pair, the
    flux divergence is spectral and evaluated as the pair average.
    """
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    out = []
    for a, b in zip(frames[:-1], frames[1:]):
        grid = a.grid
        dt = b.time - a.time
        rho_t = (np.abs(b.values) ** 2 - np.abs(a.values) ** 2) / dt
        div = 0.0
        for w in (a, b):
            j = np.imag(np.conj(w.values) * spectral_derivative(w.values, grid))
            div = div + 0.5 * np.real(spectral_derivative(j, grid))
        r = rho_t + div
        out.append(np.sqrt(np.sum(np.abs(r) ** 2) * grid.dx))
    return np.asarray(out)


def quantum_potential(psi: Wavefunction, density_floor: float = 1e-12) -> np.ndarray:
    """Q = -(1/2) |psi|'' / |psi| on valid points, NaN below the floor."""
    amp = np.abs(psi.values)
    valid = amp**2 > density_floor
    curv = np.real(spectral_derivative(spectral_derivative(amp, psi.grid), psi.grid))
    q = np.full_like(amp, np.nan)
    q[valid] = -0.5 * curv[valid] / amp[valid]
    return q


def max_mean_velocity(record: RunRecord) -> float:
    """max_t |d<x>/dt| on the snapshot grid."""
    t, _, mx, _ = record.as_arrays()
    return float(np.max(np.abs(np.diff(mx) / np.diff(t))))


def fit_powerlaw(t_p: np.ndarray, y: np.ndarray) -> PowerLawFit:
    """Least-squares power law y = A t_p^k on log-log axes."""
    t_p = np.asarray(t_p, dtype=float)
    y = np.asarray(y, dtype=float)
    if t_p.size < 3:
        raise ValueError("need at least 3 points for a power-law fit")
    if np.any(y <= 0.0) or np.any(t_p <= 0.0):
        raise ValueError("power-law fit requires positive data")
    lx, ly = np.log(t_p), np.log(y)
    k, lna = np.polyfit(lx, ly, 1)
    pred = k * lx + lna
    res = ly - pred
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(exponent=float(k), amplitude=float(np.exp(lna)), r_squared=r2, residuals=res)
