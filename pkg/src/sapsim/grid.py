"""Uniform 1D grid, wavefunction container and observables.

All quantities are dimensionless with hbar = m = omega_x = 1: lengths in
units of the harmonic ground-state width, energies in units of the trap
quantum, times in inverse trap frequencies.  Spatial derivatives are
spectral (FFT), quadrature is a plain Riemann sum with uniform dx, which
is spectrally accurate for periodic fields that decay at the box edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "Wavefunction",
    "ConfigurationError",
    "make_grid",
    "density",
    "current",
    "velocity_field",
    "populations",
    "mean_position",
    "energy",
    "spectral_derivative",
]

DENSITY_FLOOR_DEFAULT = 1e-12
EDGE_AMPLITUDE_BOUND = 1e-8


class ConfigurationError(ValueError):
    """Invalid grid or run parameters."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [x_min, x_max) with 2^m points."""

    x_min: float
    x_max: float
    n_points: int
    x: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points


@dataclass
class Wavefunction:
    """Complex field on a grid at a single time instant."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.values.copy(), self.time)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dx)

    def normalized(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.values / np.sqrt(self.norm), self.time)

    def edge_amplitude(self) -> float:
        v = np.abs(self.values)
        return float(max(v[0], v[-1]))


def make_grid(x_min: float, x_max: float, n_points: int) -> Grid:
    """Build a uniform grid with FFT wavenumbers in [-pi/dx, pi/dx)."""
    if x_max <= x_min:
        raise ConfigurationError(f"empty extent: [{x_min}, {x_max}]")
    if n_points < 256 or n_points & (n_points - 1) != 0:
        raise ConfigurationError(f"n_points must be a power of two >= 256, got {n_points}")
    dx = (x_max - x_min) / n_points
    x = x_min + dx * np.arange(n_points)
    k = 2.0 * np.pi * np.fft.fftfreq(n_points, d=dx)
    return Grid(x_min=x_min, x_max=x_max, n_points=n_points, x=x, k=k)


def quadrature(f: np.ndarray, grid: Grid) -> float:
    return float(np.sum(f) * grid.dx)


def spectral_derivative(values: np.ndarray, grid: Grid) -> np.ndarray:
    """d/dx via FFT; exact for band-limited periodic fields."""
    return np.fft.ifft(1j * grid.k * np.fft.fft(values))


def density(psi: Wavefunction) -> np.ndarray:
    return np.abs(psi.values) ** 2


def current(psi: Wavefunction) -> np.ndarray:
    """Probability current Im(psi* dpsi/dx) with spectral differentiation."""
    dpsi = spectral_derivative(psi.values, psi.grid)
    return np.imag(np.conj(psi.values) * dpsi)


def velocity_field(
    psi: Wavefunction, density_floor: float = DENSITY_FLOOR_DEFAULT
) -> tuple[np.ndarray, np.ndarray]:
    """Guidance velocity J/|psi|^2 and a validity mask.

    Points with density below the floor are zeroed and flagged invalid
    rather than clamped: near-node velocity growth is physical and must
    survive; the trajectory integrator is responsible for never querying
    invalid points.
    """
    rho = density(psi)
    j = current(psi)
    valid = rho > density_floor
    v = np.zeros_like(rho)
    np.divide(j, rho, out=v, where=valid)
    return v, valid


def populations(psi: Wavefunction, x0: float) -> tuple[float, float, float]:
    """Probability in (-inf, -x0), (-x0, x0) and (x0, inf)."""
    g = psi.grid
    if not (0.0 < x0 < min(-g.x_min, g.x_max)):
        raise ConfigurationError(f"x0={x0} outside grid [{g.x_min}, {g.x_max}]")
    rho = density(psi)
    left = g.x < -x0
    right = g.x > x0
    mid = ~(left | right)
    dx = g.dx
    return (
        float(rho[left].sum() * dx),
        float(rho[mid].sum() * dx),
        float(rho[right].sum() * dx),
    )


def mean_position(psi: Wavefunction) -> float:
    rho = density(psi)
    g = psi.grid
    return float(np.sum(g.x * rho) * g.dx / psi.norm)


def energy(psi: Wavefunction, potential_values: np.ndarray, g: float = 0.0) -> float:
    """Mean-field energy functional: kinetic + potential + g/2 |psi|^4."""
    grid = psi.grid
    dpsi = spectral_derivative(psi.values, grid)
    rho = density(psi)
    dens_integrand = 0.5 * np.abs(dpsi) ** 2 + potential_values * rho + 0.5 * g * rho**2
    return quadrature(dens_integrand, grid)


def chemical_potential(psi: Wavefunction, potential_values: np.ndarray, g: float = 0.0) -> float:
    """Chemical potential <psi|H_GP|psi>/<psi|psi> (g term unhalved)."""
    grid = psi.grid
    dpsi = spectral_derivative(psi.values, grid)
    rho = density(psi)
    integrand = 0.5 * np.abs(dpsi) ** 2 + potential_values * rho + g * rho**2
    return quadrature(integrand, grid) / psi.norm
