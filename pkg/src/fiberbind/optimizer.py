"""Minimum-energy configurations of particles in an external lattice.

The discrete problem places particles at well bottoms and ranks every
strictly increasing assignment by total potential energy. ``local_relax``
then refines a configuration continuously by gradient descent.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core_types import (
    ConvergenceError,
    LatticePotential,
    ParticleChain,
    Spectrum,
    ValidationError,
)
from .pair_interactions import (
    lattice_potential_value,
    pair_force_derivative,
    pair_potential,
    total_forces,
    total_potential,
)

DEFAULT_CAP = 10 ** 7
_BATCH = 1 << 15
_STALL = 2000


@dataclass(frozen=True)
class RankedConfig:
    rank: int
    assignment: tuple[int, ...]
    energy: float


def _energy_tables(wells: np.ndarray, spectrum: Spectrum, lattice: LatticePotential):
    x = wells * math.pi / lattice.wavenumber
    sep = np.abs(x[None, :] - x[:, None])
    pair = np.asarray(pair_potential(sep, spectrum), dtype=float)
    site = np.asarray(lattice_potential_value(x, lattice), dtype=float)
    return pair, site


def _batch_energies(idx: np.ndarray, pair: np.ndarray, site: np.ndarray) -> np.ndarray:
    n = idx.shape[1]
    energy = site[idx].sum(axis=1)
    for a in range(n):
        for b in range(a + 1, n):
            energy = energy + pair[idx[:, a], idx[:, b]]
    return energy


def _batches(n_wells: int, n: int):
    combos = itertools.combinations(range(n_wells), n)
    while True:
        chunk = list(itertools.islice(combos, _BATCH))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.intp).reshape(len(chunk), n)


def _rank_with_ties(assignments: list[tuple[int, ...]], energies: np.ndarray,
                    tie_tol: float) -> list[RankedConfig]:
    order = sorted(range(len(assignments)), key=lambda i: (energies[i], assignments[i]))
    # energies equal up to rounding form one tie group, ordered lexicographically
    groups, current = [], [order[0]]
    for i in order[1:]:
        ref = energies[current[0]]
        if abs(energies[i] - ref) <= tie_tol * max(1.0, abs(ref)):
            current.append(i)
        else:
            groups.append(current)
            current = [i]
    groups.append(current)
    ranked, position = [], 1
    for group in groups:
        for i in sorted(group, key=lambda i: assignments[i]):
            ranked.append(RankedConfig(position, assignments[i], float(energies[i])))
        position += len(group)
    return ranked


def enumerate_well_configs(num_particles: int, wells: Sequence[int], spectrum: Spectrum,
                           lattice: LatticePotential, cap: int = DEFAULT_CAP,
                           workers: int = 1, tie_tol: float = 1e-12) -> list[RankedConfig]:
    """Rank every strictly increasing assignment of particles to wells.

    Particles sit at the well bottoms z * pi / k_V. The result is sorted by
    energy; assignments whose energies agree to ``tie_tol`` (relative) share
    a rank and are listed lexicographically.
    """
    spectrum.require_valid()
    wells = np.array(sorted(set(int(w) for w in wells)), dtype=int)
    if num_particles < 1:
        raise ValidationError("need at least one particle")
    if wells.size < num_particles:
        raise ValidationError(f"{wells.size} wells cannot hold {num_particles} particles")
    count = math.comb(wells.size, num_particles)
    if count > cap:
        raise ValidationError(f"{count} configurations exceed the enumeration cap of {cap}")
    pair, site = _energy_tables(wells, spectrum, lattice)
    batches = list(_batches(wells.size, num_particles))
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda idx: _batch_energies(idx, pair, site), batches))
    else:
        parts = [_batch_energies(idx, pair, site) for idx in batches]
    energies = np.concatenate(parts)
    index = np.concatenate(batches)
    assignments = [tuple(int(w) for w in row) for row in wells[index]]
    assert len(assignments) == count
    return _rank_with_ties(assignments, energies, tie_tol)


@dataclass(frozen=True)
class RelaxResult:
    chain: ParticleChain
    converged: bool
    iterations: int
    residual: float
    energies: tuple[float, ...]
    left_well: tuple[int, ...]

    @property
    def energy(self) -> float:
        return self.energies[-1]


def energy_hessian(positions, spectrum: Spectrum,
                   lattice: Optional[LatticePotential] = None) -> np.ndarray:
    """Second derivatives of the total potential with respect to positions."""
    x = np.asarray(positions, dtype=float)
    n = x.size
    left, right = np.triu_indices(n, 1)
    curv = np.asarray(pair_force_derivative(x[right] - x[left], spectrum), dtype=float)
    hess = np.zeros((n, n))
    np.add.at(hess, (left, left), curv)
    np.add.at(hess, (right, right), curv)
    np.add.at(hess, (left, right), -curv)
    np.add.at(hess, (right, left), -curv)
    if lattice is not None:
        k = lattice.wavenumber
        hess[np.diag_indices(n)] += 2.0 * lattice.depth * k ** 2 * np.cos(2.0 * k * x)
    return hess


def _newton_step(x, force, fmax, energy, spectrum, lattice, max_move):
    """Trial Newton step, or None unless it is small, ordered and reduces |F|."""
    hess = energy_hessian(x, spectrum, lattice)
    try:
        factor = np.linalg.cholesky(hess)
    except np.linalg.LinAlgError:
        return None
    delta = np.linalg.solve(factor.T, np.linalg.solve(factor, force))
    if float(np.max(np.abs(delta))) > max_move:
        return None
    trial = x + delta
    if not np.all(np.diff(trial) > 0):
        return None
    e_trial = total_potential(trial, spectrum, lattice)
    if e_trial > energy + 8.0 * np.finfo(float).eps * max(1.0, abs(energy)):
        return None
    f_trial = total_forces(trial, spectrum, lattice)
    if float(np.max(np.abs(f_trial))) >= fmax:
        return None
    return trial, e_trial, f_trial


def local_relax(chain: ParticleChain, spectrum: Spectrum,
                lattice: Optional[LatticePotential] = None, tolerance: float = 1e-9,
                max_iter: int = 200_000, raise_on_failure: bool = True) -> RelaxResult:
    """Relax to a point where max |F| < tolerance.

    Where the Hessian is positive definite a Newton step is tried first. It
    is kept only if it moves no particle further than a descent step may,
    keeps the order, does not raise the energy and reduces the force.
    Otherwise steepest descent with backtracking is used: trial steps never move any particle by more than 0.01/k (k the lattice
    wavenumber, else the largest line wavenumber) and are halved until the
    energy does not increase and the ordering is kept. Once energy changes
    fall below rounding, a step is also accepted if it reduces the force.
    The search gives up early when max |F| has not fallen by 1% within
    2000 iterations.
    """
    spectrum.require_valid()
    k_ref = lattice.wavenumber if lattice is not None else float(np.max(spectrum.wavenumbers))
    max_move = 0.01 / k_ref
    x = np.array(chain.positions, dtype=float)
    x0 = x.copy()
    energy = total_potential(x, spectrum, lattice)
    force = total_forces(x, spectrum, lattice)
    energies = [energy]
    alpha = max_move / max(float(np.max(np.abs(force))), 1e-300)
    it = 0
    fmax = float(np.max(np.abs(force)))
    best, best_it = fmax, 0
    while fmax >= tolerance and it < max_iter:
        it += 1
        if fmax < 0.99 * best:
            best, best_it = fmax, it
        elif it - best_it > _STALL:
            # the force no longer drops: rounding limits what is reachable
            break
        newton = _newton_step(x, force, fmax, energy, spectrum, lattice, max_move)
        if newton is not None:
            x, energy, force = newton
            fmax = float(np.max(np.abs(force)))
            energies.append(energy)
            continue
        alpha = min(2.0 * alpha, max_move / fmax)
        accepted = False
        for _ in range(60):
            trial = x + alpha * force
            if np.all(np.diff(trial) > 0):
                e_trial = total_potential(trial, spectrum, lattice)
                slack = 8.0 * np.finfo(float).eps * max(1.0, abs(energy))
                if e_trial <= energy - 1e-4 * alpha * float(force @ force):
                    accepted = True
                elif e_trial <= energy + slack:
                    f_trial = total_forces(trial, spectrum, lattice)
                    accepted = float(np.max(np.abs(f_trial))) < fmax
                if accepted:
                    break
            alpha *= 0.5
        if not accepted:
            break
        x = trial
        energy = e_trial
        force = total_forces(x, spectrum, lattice)
        fmax = float(np.max(np.abs(force)))
        energies.append(e_trial)
    converged = fmax < tolerance
    if not converged and raise_on_failure:
        raise ConvergenceError(f"relaxation stopped after {it} iterations with max |F| = {fmax:.3g}",
                               fmax)
    if lattice is not None:
        half = 0.5 * math.pi / lattice.wavenumber
        wells0 = np.round(x0 * lattice.wavenumber / math.pi)
        bottoms = wells0 * math.pi / lattice.wavenumber
        left = tuple(int(j) for j in np.nonzero(np.abs(x - bottoms) > half)[0])
    else:
        left = ()
    return RelaxResult(ParticleChain(tuple(x)), converged, it, fmax, tuple(energies), left)


@dataclass(frozen=True)
class LandscapeScan:
    particle: int
    x: np.ndarray
    pair: np.ndarray
    lattice: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.pair + self.lattice


def landscape_scan(j: int, chain: ParticleChain, spectrum: Spectrum, lattice: LatticePotential,
                   grid=None, samples: int = 401) -> LandscapeScan:
    """Potential of particle ``j`` moved across its well with the others fixed.

    Without an explicit ``grid`` the scan spans the particle's own well,
    +- pi/(2 k_V) around the nearest well bottom, clipped to stay strictly
    between the neighbouring particles.
    """
    n = len(chain)
    if not 0 <= j < n:
        raise IndexError(f"particle index {j} out of range for chain of {n}")
    pos = chain.array
    lo_bound = pos[j - 1] if j > 0 else -np.inf
    hi_bound = pos[j + 1] if j < n - 1 else np.inf
    if grid is None:
        bottom = round(pos[j] * lattice.wavenumber / math.pi) * math.pi / lattice.wavenumber
        half = 0.5 * math.pi / lattice.wavenumber
        lo, hi = bottom - half, bottom + half
        pad = 1e-9 * half
        lo, hi = max(lo, lo_bound + pad), min(hi, hi_bound - pad)
        grid = np.linspace(lo, hi, samples)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= lo_bound) or np.any(grid >= hi_bound):
        raise ValidationError("scan grid must stay between the neighbouring particles")
    others = np.delete(pos, j)
    if others.size:
        pair = np.asarray(pair_potential(np.abs(grid[:, None] - others[None, :]), spectrum)).sum(axis=1)
    else:
        pair = np.zeros_like(grid)
    return LandscapeScan(j, grid, pair, np.asarray(lattice_potential_value(grid, lattice)))
