"""Deterministic time integration of particles along the waveguide.

Equations of motion are M x'' = F(x) - mu x' with F the weak-coupling pair
forces plus the optional lattice force. Particles must keep their order: a
step that would let neighbours cross is retried with a halved time step and
eventually reported as an error.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core_types import (
    SPEED_OF_LIGHT,
    LatticePotential,
    ParticleChain,
    ParticleCrossingError,
    Spectrum,
    ValidationError,
)
from .pair_interactions import chain_pair_energy, lattice_potential_value, total_forces

log = logging.getLogger(__name__)

INTEGRATORS = ("damped_newtonian", "overdamped", "undamped_newtonian")


@dataclass(frozen=True)
class DynamicsConfig:
    mass: float = 1.0
    friction: float = 0.0
    timestep: float = 1e-2
    duration: float = 10.0
    integrator: str = "damped_newtonian"
    record_stride: int = 1
    force_tol: float = 1e-8
    velocity_tol: float = 1e-8
    stop_on_convergence: bool = False
    max_halvings: int = 6

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValidationError(f"unknown integrator {self.integrator!r}; "
                                  f"choose from {', '.join(INTEGRATORS)}")
        if not self.mass > 0:
            raise ValidationError("mass must be positive")
        if self.friction < 0:
            raise ValidationError("friction must be non-negative")
        if self.integrator == "overdamped" and self.friction == 0:
            raise ValidationError("overdamped integration needs a positive friction")
        if not self.timestep > 0 or not self.duration > 0:
            raise ValidationError("timestep and duration must be positive")
        if self.record_stride < 1:
            raise ValidationError("record_stride must be >= 1")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.timestep))


class State(NamedTuple):
    positions: np.ndarray
    velocities: np.ndarray
    forces: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    converged: bool
    final_forces: np.ndarray

    @property
    def final_positions(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def separations(self) -> np.ndarray:
        return np.diff(self.positions, axis=1)


def characteristic_times(config: DynamicsConfig, spectrum: Spectrum,
                         lattice: Optional[LatticePotential] = None):
    """Return ``(t_mu, t_0)``; either is ``None`` when undefined.

    t_mu = M / mu is the momentum relaxation time. t_0 is the oscillation
    time scale sqrt(M n c (1/sum I_m + 1/I_V)) of lattice-trapped particles.
    """
    t_mu = config.mass / config.friction if config.friction > 0 else None
    t_0 = None
    if lattice is not None:
        n = spectrum.refractive_index
        inv = 0.0
        total_i = float(np.sum(spectrum.intensities))
        if total_i != 0:
            inv += 1.0 / total_i
        i_v = lattice.beam_intensity(n)
        if i_v > 0:
            inv += 1.0 / i_v
        value = config.mass * n * SPEED_OF_LIGHT * inv
        t_0 = math.sqrt(value) if value > 0 else None
    return t_mu, t_0


def make_force_fn(spectrum: Spectrum, lattice: Optional[LatticePotential] = None) -> Callable:
    spectrum.require_valid()

    def forces(x):
        return total_forces(x, spectrum, lattice)

    return forces


def _raw_step(state: State, forces_fn, config: DynamicsConfig, dt: float) -> State:
    x, v, f = state
    m, mu = config.mass, config.friction
    if config.integrator == "overdamped":
        x_new = x + dt * f / mu
        f_new = forces_fn(x_new)
        return State(x_new, f_new / mu, f_new)
    if config.integrator == "undamped_newtonian":
        mu = 0.0
    # velocity Verlet; friction treated implicitly in the second half kick
    v_half = v + 0.5 * dt * (f - mu * v) / m
    x_new = x + dt * v_half
    f_new = forces_fn(x_new)
    v_new = (v_half + 0.5 * dt * f_new / m) / (1.0 + 0.5 * dt * mu / m)
    return State(x_new, v_new, f_new)


def _crossings(x: np.ndarray) -> list[int]:
    return [int(j) for j in np.nonzero(np.diff(x) <= 0)[0]]


def step(state: State, forces_fn, config: DynamicsConfig, dt: Optional[float] = None) -> State:
    """Advance one time step, subdividing it if particles would cross."""
    dt = config.timestep if dt is None else dt
    for halving in range(config.max_halvings + 1):
        sub = 2 ** halving
        trial = state
        for _ in range(sub):
            trial = _raw_step(trial, forces_fn, config, dt / sub)
            bad = _crossings(trial.positions)
            if bad:
                break
        if not bad:
            if halving:
                log.debug("step needed %d substeps", sub)
            return trial
    pairs = ", ".join(f"({j}, {j + 1})" for j in bad)
    raise ParticleCrossingError(f"particles {pairs} crossed even with dt/{sub}", bad)


def initial_state(chain: ParticleChain, forces_fn, velocities=None) -> State:
    x = np.array(chain.positions, dtype=float)
    v = np.zeros_like(x) if velocities is None else np.array(velocities, dtype=float)
    if v.shape != x.shape:
        raise ValidationError("need one initial velocity per particle")
    return State(x, v, forces_fn(x))


def simulate(chain: ParticleChain, spectrum: Spectrum, lattice: Optional[LatticePotential],
             config: DynamicsConfig, velocities=None) -> Trajectory:
    forces_fn = make_force_fn(spectrum, lattice)
    state = initial_state(chain, forces_fn, velocities)
    if config.integrator == "overdamped":
        state = State(state.positions, state.forces / config.friction, state.forces)
    k_max = float(np.max(np.abs(spectrum.wavenumbers)))
    if lattice is not None:
        k_max = max(k_max, 2.0 * lattice.wavenumber)
    times, xs, vs = [0.0], [state.positions], [state.velocities]
    n_steps = config.steps
    converged = False
    warned = False
    for i in range(1, n_steps + 1):
        state = step(state, forces_fn, config)
        v_max = float(np.max(np.abs(state.velocities)))
        if not warned and config.timestep * k_max * v_max > 0.1:
            warnings.warn(f"time step {config.timestep} is coarse relative to the force "
                          f"oscillations (dt*k*v = {config.timestep * k_max * v_max:.3g})",
                          stacklevel=2)
            warned = True
        converged = (float(np.max(np.abs(state.forces))) < config.force_tol
                     and v_max < config.velocity_tol)
        last = i == n_steps or (converged and config.stop_on_convergence)
        if i % config.record_stride == 0 or last:
            times.append(i * config.timestep)
            xs.append(state.positions)
            vs.append(state.velocities)
        if last:
            break
    return Trajectory(np.array(times), np.array(xs), np.array(vs), converged, state.forces)


def total_energy(positions, velocities, spectrum: Spectrum, mass: float,
                 lattice: Optional[LatticePotential] = None) -> float:
    """Kinetic plus pair plus lattice energy."""
    x = np.asarray(positions, dtype=float)
    energy = 0.5 * mass * float(np.sum(np.asarray(velocities) ** 2)) + chain_pair_energy(x, spectrum)
    if lattice is not None:
        energy += float(np.sum(lattice_potential_value(x, lattice)))
    return energy
