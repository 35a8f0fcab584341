"""Weak-coupling pair forces, potentials and lattice couplings.

In the zeta -> 0 limit the force on every particle of an ordered chain is a
sum of pair terms. ``pair_force(d)`` is the force on the *left* particle of
a pair at separation d; positive values push it to the right, i.e. towards
its partner. The right particle feels the opposite force. Forces are in
units of I1/(n c) with c = 1, potentials in the same units times 1/k1.

Particle indices are zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core_types import (
    SPEED_OF_LIGHT,
    LatticePotential,
    ParticleChain,
    Spectrum,
    ValidationError,
)


def _check_index(j: int, n: int) -> None:
    if not 0 <= j < n:
        raise IndexError(f"particle index {j} out of range for chain of {n}")


def _positions(chain) -> np.ndarray:
    if isinstance(chain, ParticleChain):
        return chain.array
    return np.asarray(chain, dtype=float)


def lorentzian_density(omega, spectrum: Spectrum) -> np.ndarray:
    """Spectral intensity I(omega) of a sum of Lorentzian lines.

    Monochromatic lines (zero width) are delta functions and are left out.
    """
    omega = np.asarray(omega, dtype=float)
    n, c = spectrum.refractive_index, SPEED_OF_LIGHT
    total = np.zeros_like(omega)
    for line in spectrum.lines:
        if line.linewidth == 0:
            continue
        omega_m = c * line.wavenumber / n
        cg = c * line.linewidth
        total = total + line.intensity / np.pi * cg / (cg ** 2 + n ** 2 * (omega - omega_m) ** 2)
    return total


def spectral_force_density(j: int, chain, omega, spectrum: Spectrum):
    """Force per unit frequency on particle ``j`` at frequency ``omega``."""
    x = _positions(chain)
    _check_index(j, len(x))
    omega = np.asarray(omega, dtype=float)
    n, c = spectrum.refractive_index, SPEED_OF_LIGHT
    d = x - x[j]
    sign = np.sign(d)
    phase = n * np.multiply.outer(omega, d) / c
    geometric = (sign * np.cos(phase)).sum(axis=-1)
    return lorentzian_density(omega, spectrum) / c * geometric


def pair_force(distance, spectrum: Spectrum):
    """sum_m I_m/(n c) exp(-gamma_m d) cos(k_m d)."""
    spectrum.require_valid()
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValidationError("pair distance must be non-negative")
    dd = d[..., None]
    terms = spectrum.force_amplitudes * np.exp(-spectrum.linewidths * dd) * np.cos(spectrum.wavenumbers * dd)
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def pair_potential(distance, spectrum: Spectrum):
    """Pair potential whose derivative with respect to d is ``pair_force``.

    This equals minus the derivative with respect to the left particle's
    position, so the dynamics generated by the summed pair potentials are
    exactly those of ``force_on_particle``.
    """
    spectrum.require_valid()
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValidationError("pair distance must be non-negative")
    dd = d[..., None]
    k, g = spectrum.wavenumbers, spectrum.linewidths
    terms = (spectrum.force_amplitudes / (k ** 2 + g ** 2) * np.exp(-g * dd)
             * (k * np.sin(k * dd) - g * np.cos(k * dd)))
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def pair_force_derivative(distance, spectrum: Spectrum):
    """d/dd of ``pair_force``; positive slope marks a stable zero."""
    d = np.asarray(distance, dtype=float)[..., None]
    k, g = spectrum.wavenumbers, spectrum.linewidths
    terms = -spectrum.force_amplitudes * np.exp(-g * d) * (g * np.cos(k * d) + k * np.sin(k * d))
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def chain_forces(positions, spectrum: Spectrum) -> np.ndarray:
    """Pairwise forces on all particles of an ordered chain.

    Each pair term is evaluated once and added with opposite signs to the
    two partners, so the forces sum to zero up to rounding.
    """
    x = _positions(positions)
    n = len(x)
    forces = np.zeros(n)
    if n < 2:
        return forces
    left, right = np.triu_indices(n, 1)
    f = pair_force(np.abs(x[right] - x[left]), spectrum)
    np.add.at(forces, left, f)
    np.add.at(forces, right, -f)
    return forces


def chain_pair_energy(positions, spectrum: Spectrum) -> float:
    """Sum of pair potentials over all unordered pairs."""
    x = _positions(positions)
    if len(x) < 2:
        return 0.0
    left, right = np.triu_indices(len(x), 1)
    return float(np.sum(pair_potential(np.abs(x[right] - x[left]), spectrum)))


def force_on_particle(j: int, chain, spectrum: Spectrum) -> float:
    x = _positions(chain)
    _check_index(j, len(x))
    d = x - x[j]
    right = pair_force(d[d > 0], spectrum) if np.any(d > 0) else 0.0
    left = pair_force(-d[d < 0], spectrum) if np.any(d < 0) else 0.0
    return float(np.sum(right) - np.sum(left))


def single_particle_potential(j: int, chain, spectrum: Spectrum) -> float:
    """Potential felt by particle ``j`` with all other particles held fixed."""
    x = _positions(chain)
    _check_index(j, len(x))
    others = np.delete(x, j)
    if others.size == 0:
        return 0.0
    return float(np.sum(pair_potential(np.abs(others - x[j]), spectrum)))


def lattice_potential_value(x, lattice: LatticePotential):
    out = -lattice.depth * np.cos(lattice.wavenumber * np.asarray(x, dtype=float)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def lattice_force(x, lattice: LatticePotential):
    # -dV/dx of -V0 cos^2(kx)
    k = lattice.wavenumber
    out = -lattice.depth * k * np.sin(2.0 * k * np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def total_potential(chain, spectrum: Spectrum, lattice: Optional[LatticePotential] = None) -> float:
    """Half the sum of single-particle potentials, plus the lattice energy."""
    x = _positions(chain)
    energy = chain_pair_energy(x, spectrum)
    if lattice is not None:
        energy += float(np.sum(lattice_potential_value(x, lattice)))
    return energy


def total_forces(positions, spectrum: Spectrum, lattice: Optional[LatticePotential] = None) -> np.ndarray:
    forces = chain_forces(positions, spectrum)
    if lattice is not None:
        forces = forces + lattice_force(_positions(positions), lattice)
    return forces


@dataclass(frozen=True)
class PairCoupling:
    """Second-order expansion of one pair potential about the well bottoms.

    The pair energy is approximately
    ``constant + linear * (D_right - D_left) + quadratic * (D_right - D_left)**2``
    where D are the displacements from the well bottoms.
    """

    left: int
    right: int
    well_separation: int
    constant: float
    linear: float
    quadratic: float


@dataclass(frozen=True)
class HarmonicExpansion:
    wells: tuple[int, ...]
    couplings: tuple[PairCoupling, ...]
    trap_curvature: float
    trap_offset: float

    def energy(self, displacements) -> float:
        delta = np.asarray(displacements, dtype=float)
        if delta.shape != (len(self.wells),):
            raise ValidationError("need one displacement per particle")
        energy = len(self.wells) * self.trap_offset + self.trap_curvature * float(np.sum(delta ** 2))
        for c in self.couplings:
            rel = delta[c.right] - delta[c.left]
            energy += c.constant + c.linear * rel + c.quadratic * rel ** 2
        return energy

    def coupling_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Linear force vector and Hessian of the quadratic energy."""
        n = len(self.wells)
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        hess[np.diag_indices(n)] = 2.0 * self.trap_curvature
        for c in self.couplings:
            grad[c.right] += c.linear
            grad[c.left] -= c.linear
            q = 2.0 * c.quadratic
            hess[c.right, c.right] += q
            hess[c.left, c.left] += q
            hess[c.left, c.right] -= q
            hess[c.right, c.left] -= q
        return grad, hess


def harmonic_expansion(wells: Sequence[int], spectrum: Spectrum,
                       lattice: LatticePotential) -> HarmonicExpansion:
    """Expand pair and lattice energies to second order about well bottoms.

    Requires monochromatic lines. For each pair the coupling depends only on
    the integer well separation through sin and cos of
    ``|z_j - z_l| * pi * k_m / k_V``.
    """
    spectrum.require_valid()
    if np.any(spectrum.linewidths > 0):
        raise ValidationError("harmonic expansion requires zero linewidth on every line")
    z = [int(w) for w in wells]
    if any(z[i] >= z[i + 1] for i in range(len(z) - 1)):
        raise ValidationError("well indices must be strictly increasing")
    a = spectrum.force_amplitudes
    k = spectrum.wavenumbers
    couplings = []
    for left in range(len(z)):
        for right in range(left + 1, len(z)):
            sep = z[right] - z[left]
            phase = sep * np.pi * k / lattice.wavenumber
            couplings.append(PairCoupling(
                left, right, sep,
                constant=float(np.sum(a / k * np.sin(phase))),
                linear=float(np.sum(a * np.cos(phase))),
                quadratic=float(-np.sum(a * k / 2.0 * np.sin(phase))),
            ))
    return HarmonicExpansion(tuple(z), tuple(couplings), lattice.curvature, -lattice.depth)
