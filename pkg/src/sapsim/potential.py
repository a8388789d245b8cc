"""Triple-well potential: harmonic trap plus two time-dependent Gaussian barriers.

V(x,t) = x^2/2 + V12(t) exp(-(x+x0)^2/2 sigma^2) + V23(t) exp(-(x-x0)^2/2 sigma^2)

The right barrier V23 pulses first; the left barrier follows after a
delay t_d (counter-intuitive ordering: middle-right tunneling is opened
before left-middle).  Each pulse dips from V_max to V_min along a
quartic profile over a time t_p and is clamped at V_max outside its
pulse window.  Total transport time T = t_p + t_d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ConfigurationError, Grid

__all__ = ["PotentialParams", "barrier_height", "potential", "schedule_snapshot"]


@dataclass(frozen=True)
class PotentialParams:
    v_min: float = 5.0
    v_max: float = 1000.0
    sigma: float = 0.16
    x0: float = 0.48
    t_p: float = 5000.0
    t_d: float = 750.0  # default 0.15 * t_p

    def __post_init__(self):
        bare = self.v_min == 0.0 and self.v_max == 0.0  # barrier-free harmonic trap
        if not bare and not (0.0 < self.v_min < self.v_max):
            raise ConfigurationError(f"need 0 < v_min < v_max, got {self.v_min}, {self.v_max}")
        if self.sigma <= 0.0 or self.x0 <= 0.0:
            raise ConfigurationError("sigma and x0 must be positive")
        if self.t_p <= 0.0 or not (0.0 <= self.t_d < self.t_p):
            raise ConfigurationError(f"need t_p > 0 and 0 <= t_d < t_p, got {self.t_p}, {self.t_d}")

    @property
    def total_time(self) -> float:
        return self.t_p + self.t_d

    @property
    def symmetric_time(self) -> float:
        """Instant where V12 = V23 and the potential is mirror symmetric."""
        return 0.5 * (self.t_p + self.t_d)


def barrier_height(t, t_offset: float, p: PotentialParams):
    """Quartic barrier pulse evaluated at shifted time t - t_offset.

    V_max outside (0, t_p); (V_max - V_min)(2t'/t_p - 1)^4 + V_min inside.
    Accepts scalars or arrays in t.
    """
    ts = np.asarray(t, dtype=float) - t_offset
    u = 2.0 * ts / p.t_p - 1.0
    pulse = (p.v_max - p.v_min) * u**4 + p.v_min
    out = np.where((ts <= 0.0) | (ts >= p.t_p), p.v_max, pulse)
    return float(out) if np.isscalar(t) else out


def barrier_heights(t, p: PotentialParams):
    """(V12, V23) at time t; V12 lags V23 by t_d."""
    return barrier_height(t, p.t_d, p), barrier_height(t, 0.0, p)


def potential(x, t, p: PotentialParams):
    """Total potential at position(s) x and time t."""
    x = np.asarray(x, dtype=float)
    v12, v23 = barrier_heights(t, p)
    inv2s2 = 1.0 / (2.0 * p.sigma**2)
    v = (
        0.5 * x**2
        + v12 * np.exp(-((x + p.x0) ** 2) * inv2s2)
        + v23 * np.exp(-((x - p.x0) ** 2) * inv2s2)
    )
    return v


def schedule_snapshot(t: float, p: PotentialParams, grid: Grid) -> np.ndarray:
    """Potential evaluated on the whole grid at time t."""
    return potential(grid.x, t, p)
