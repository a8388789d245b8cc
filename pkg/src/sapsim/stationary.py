"""Stationary states: imaginary-time ground states and frozen-potential spectra.

Ground-state preparation relaxes in imaginary time with the same split
step as the real-time propagator (t -> -i tau) and renormalization each
step.  Localization in a single well is enforced by masking the t = 0
potential to V_max beyond the far side of the adjacent barrier peak, so
the result does not depend on how long the relaxation runs.

The linear eigensolver uses a second-order finite-difference Hamiltonian
(symmetric tridiagonal) rather than the spectral operator, keeping it an
independent route from the propagator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid import Grid, Wavefunction, chemical_potential, energy
from .potential import PotentialParams, schedule_snapshot

__all__ = [
    "PreparationError",
    "PreparationResult",
    "EigenSolution",
    "ThreeModeModel",
    "ground_state",
    "prepare_ground_state",
    "eigenstates",
    "three_mode_extract",
    "find_dark_state",
]

IMAG_DT = 1e-3
ENERGY_RTOL = 1e-10
CHECK_EVERY = 100
MAX_STEPS = 2_000_000


class PreparationError(RuntimeError):
    """Imaginary-time relaxation failed to converge."""


@dataclass
class PreparationResult:
    psi: Wavefunction
    energy: float
    chemical_potential: float
    steps: int


@dataclass
class EigenSolution:
    """Lowest eigenpairs of a frozen potential, ascending energies.

    States are real, orthonormal under the dx quadrature.
    """

    energies: np.ndarray
    states: np.ndarray  # shape (n_states, n_points)
    grid: Grid
    potential_values: np.ndarray


@dataclass
class ThreeModeModel:
    omega1: float  # left-middle tunneling rate
    omega2: float  # middle-right tunneling rate

    @property
    def theta(self) -> float:
        return float(np.arctan2(self.omega1, self.omega2))


def masked_potential(p: PotentialParams, grid: Grid, well: str) -> np.ndarray:
    """t = 0 potential clamped to V_max outside the chosen well."""
    v = schedule_snapshot(0.0, p, grid)
    if p.v_max == 0.0:  # bare trap: nothing to isolate
        return v
    x = grid.x
    if well == "left":
        mask = x > -p.x0 + p.sigma
    elif well == "right":
        mask = x < p.x0 - p.sigma
    elif well == "middle":
        mask = (x < -p.x0 - p.sigma) | (x > p.x0 + p.sigma)
    else:
        raise ValueError(f"unknown well {well!r}")
    return np.where(mask, np.maximum(v, p.v_max), v)


def prepare_ground_state(
    p: PotentialParams,
    grid: Grid,
    well: str = "left",
    g: float = 0.0,
    dtau: float = IMAG_DT,
) -> PreparationResult:
    """Relax to the (possibly nonlinear) ground state of one well."""
    if g < 0.0:
        raise ValueError("attractive g not supported")
    v = masked_potential(p, grid, well)
    x = grid.x
    dx = grid.dx

    # seed: narrow Gaussian at the masked-potential minimum
    x_seed = x[np.argmin(v)]
    psi = np.exp(-((x - x_seed) ** 2)).astype(complex)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * dx)

    kin = np.exp(-0.5 * dtau * grid.k**2)
    exp_v_half = np.exp(-0.5 * dtau * v)

    def relax_step(psi):
        if g != 0.0:
            psi = psi * exp_v_half * np.exp(-0.5 * dtau * g * np.abs(psi) ** 2)
        else:
            psi = psi * exp_v_half
        psi = np.fft.ifft(kin * np.fft.fft(psi))
        if g != 0.0:
            psi = psi * exp_v_half * np.exp(-0.5 * dtau * g * np.abs(psi) ** 2)
        else:
            psi = psi * exp_v_half
        return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * dx)

    e_prev = np.inf
    steps = 0
    while steps < MAX_STEPS:
        for _ in range(CHECK_EVERY):
            psi = relax_step(psi)
        steps += CHECK_EVERY
        e = energy(Wavefunction(grid, psi), v, g)
        if abs(e - e_prev) <= ENERGY_RTOL * max(abs(e), 1.0):
            w = Wavefunction(grid, psi)
            return PreparationResult(
                psi=w,
                energy=e,
                chemical_potential=chemical_potential(w, v, g),
                steps=steps,
            )
        e_prev = e
    raise PreparationError(
        f"no convergence after {steps} steps (well={well}, g={g}, last E={e_prev})"
    )


def ground_state(p: PotentialParams, grid: Grid, well: str = "left", g: float = 0.0) -> Wavefunction:
    return prepare_ground_state(p, grid, well, g).psi


def eigenstates(p: PotentialParams, t: float, grid: Grid, n: int = 3) -> EigenSolution:
    """Lowest n eigenpairs of the frozen linear Hamiltonian at time t."""
    if not (1 <= n <= 10):
        raise ValueError("n must be in [1, 10]")
    v = schedule_snapshot(t, p, grid)
    dx2 = grid.dx**2
    diag = 1.0 / dx2 + v
    off = np.full(grid.n_points - 1, -0.5 / dx2)
    vals, vecs = scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, n - 1))
    states = vecs.T / np.sqrt(grid.dx)  # quadrature-orthonormal
    # sign convention: positive mean amplitude region by max |value|
    for s in states:
        if s[np.argmax(np.abs(s))] < 0:
            s *= -1.0
    return EigenSolution(energies=vals, states=states, grid=grid, potential_values=v)


def three_mode_extract(sol: EigenSolution, x0: float) -> ThreeModeModel:
    """Tunneling rates from the lowest three-state manifold.

    Localized left/middle/right modes are obtained by diagonalizing the
    position operator within the manifold (maximally localized states);
    the rates are twice the off-diagonal elements of the projected
    Hamiltonian in that basis.
    """
    if sol.states.shape[0] < 3:
        raise ValueError("need at least 3 eigenstates")
    e = sol.energies[:3]
    phi = sol.states[:3]
    if sol.energies.shape[0] > 3:
        gap = sol.energies[3] - e[2]
        span = e[2] - e[0]
        if gap < 0.2 * span:
            raise PreparationError(
                f"three-well manifold not separated: band span {span}, gap {gap}"
            )
    dx = sol.grid.dx
    xmat = np.einsum("in,n,jn->ij", phi, sol.grid.x, phi) * dx
    pos, w = np.linalg.eigh(xmat)  # ascending position: left, middle, right
    h3 = w.T @ np.diag(e) @ w
    omega1 = 2.0 * abs(h3[0, 1])
    omega2 = 2.0 * abs(h3[1, 2])
    return ThreeModeModel(omega1=omega1, omega2=omega2)


def find_dark_state(sol: EigenSolution, x0: float):
    """Pick the manifold state with least middle-region population.

    Returns (index, middle population, node position) with the node
    refined by linear interpolation of the sign change inside (-x0, x0).
    """
    g = sol.grid
    mid = np.abs(g.x) < x0
    pops = [float(np.sum(s[mid] ** 2) * g.dx) for s in sol.states[:3]]
    idx = int(np.argmin(pops))
    s = sol.states[idx]
    node = None
    inner = np.nonzero(mid)[0]
    for i in inner[:-1]:
        if s[i] == 0.0:
            node = g.x[i]
            break
        if s[i] * s[i + 1] < 0.0:
            node = g.x[i] - s[i] * g.dx / (s[i + 1] - s[i])
            break
    return idx, pops[idx], node
