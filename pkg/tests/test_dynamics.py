import math

import numpy as np
import pytest

from fiberbind import (
    DynamicsConfig,
    LatticePotential,
    ParticleChain,
    ParticleCrossingError,
    SpectralLine,
    Spectrum,
    ValidationError,
    characteristic_times,
    preset_spectrum,
    simulate,
    total_energy,
)
from fiberbind.dynamics import initial_state, step

SQUARE = preset_spectrum("square", 10)
ONE_LINE = Spectrum.single(1.0, 1.0)


def test_config_validation():
    with pytest.raises(ValidationError):
        DynamicsConfig(integrator="leapfrog")
    with pytest.raises(ValidationError):
        DynamicsConfig(integrator="overdamped", friction=0.0)
    with pytest.raises(ValidationError):
        DynamicsConfig(timestep=0.0)
    assert DynamicsConfig(timestep=0.01, duration=1.0).steps == 100


def test_harmonic_trap_period():
    lat = LatticePotential(2.0, 1.0)
    mass = 1.5
    omega = math.sqrt(2.0 * lat.curvature / mass)
    config = DynamicsConfig(mass=mass, timestep=1e-3, duration=40.0, integrator="undamped_newtonian")
    chain = ParticleChain((lat.well_position(2) + 1e-3,))
    traj = simulate(chain, Spectrum((SpectralLine(0.0, 1.0),)), lat, config)
    x = traj.positions[:, 0] - lat.well_position(2)
    ups = np.nonzero((x[:-1] < 0) & (x[1:] >= 0))[0]
    t = traj.times[ups] - x[ups] * (traj.times[ups + 1] - traj.times[ups]) / (x[ups + 1] - x[ups])
    period = np.mean(np.diff(t))
    assert period == pytest.approx(2 * math.pi / omega, rel=1e-2)


def test_momentum_conserved_without_friction():
    config = DynamicsConfig(timestep=5e-3, duration=20.0, integrator="undamped_newtonian")
    traj = simulate(ParticleChain((0.0, 4.0, 8.5)), SQUARE, None, config, velocities=[0.1, 0.0, -0.05])
    p = traj.velocities.sum(axis=1)
    np.testing.assert_allclose(p, p[0], atol=1e-12)


def test_energy_drift_small():
    config = DynamicsConfig(timestep=5e-3, duration=50.0, integrator="undamped_newtonian")
    traj = simulate(ParticleChain((0.0, 4.0, 8.5)), SQUARE, None, config)
    e = [total_energy(x, v, SQUARE, 1.0) for x, v in zip(traj.positions, traj.velocities)]
    assert np.ptp(e) < 1e-4 * max(1.0, abs(e[0]))


def test_friction_dissipates_energy():
    config = DynamicsConfig(friction=1.0, timestep=5e-3, duration=20.0)
    traj = simulate(ParticleChain((0.0, 4.0)), SQUARE, None, config)
    e = np.array([total_energy(x, v, SQUARE, 1.0) for x, v in zip(traj.positions, traj.velocities)])
    assert np.all(np.diff(e) <= 1e-12)


def test_overdamped_agrees_with_strong_friction():
    chain = ParticleChain((0.0, 4.3))
    heavy = DynamicsConfig(mass=1e-2, friction=10.0, timestep=1e-3, duration=30.0)
    over = DynamicsConfig(friction=10.0, timestep=1e-3, duration=30.0, integrator="overdamped")
    a = simulate(chain, SQUARE, None, heavy).final_positions
    b = simulate(chain, SQUARE, None, over).final_positions
    np.testing.assert_allclose(np.diff(a), np.diff(b), atol=1e-4)


def test_overdamped_velocity_is_force_over_friction():
    config = DynamicsConfig(friction=4.0, timestep=1e-3, duration=0.01, integrator="overdamped")
    traj = simulate(ParticleChain((0.0, 4.3)), SQUARE, None, config)
    np.testing.assert_allclose(traj.velocities[-1], traj.final_forces / 4.0)


def test_runs_are_deterministic():
    config = DynamicsConfig(friction=0.5, timestep=1e-2, duration=10.0, record_stride=7)
    a = simulate(ParticleChain((0.0, 4.0, 9.0)), SQUARE, None, config)
    b = simulate(ParticleChain((0.0, 4.0, 9.0)), SQUARE, None, config)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.times, b.times)
    assert a.times[-1] == pytest.approx(10.0)
    assert a.times[1] == pytest.approx(0.07)


def test_stop_on_convergence():
    config = DynamicsConfig(friction=10.0, timestep=5e-3, duration=1000.0, stop_on_convergence=True)
    traj = simulate(ParticleChain((0.0, 4.3)), SQUARE, None, config)
    assert traj.converged
    assert traj.times[-1] < 1000.0
    assert traj.separations[-1, 0] / (2 * math.pi) == pytest.approx(0.75, abs=1e-6)


def test_crossing_is_reported():
    strong = Spectrum.single(500.0, 0.1)
    config = DynamicsConfig(timestep=0.5, duration=5.0, max_halvings=1, integrator="undamped_newtonian")
    with pytest.raises(ParticleCrossingError) as info:
        simulate(ParticleChain((0.0, 0.05)), strong, None, config)
    assert info.value.indices == (0,)


def test_substeps_avoid_spurious_crossings():
    def contact(x):
        gap = x[1] - x[0]
        push = 1e-3 / gap ** 2 if gap < 0.1 else 0.0
        return np.array([-push, push])

    config = DynamicsConfig(timestep=0.3, integrator="undamped_newtonian")
    state = initial_state(ParticleChain((0.0, 0.2)), contact, velocities=[0.5, -0.5])
    # an unsplit step overshoots before the repulsion acts
    with pytest.raises(ParticleCrossingError):
        step(state, contact, DynamicsConfig(timestep=0.3, max_halvings=0, integrator="undamped_newtonian"))
    out = step(state, contact, config)
    assert out.positions[1] > out.positions[0]


def test_coarse_timestep_warns():
    config = DynamicsConfig(timestep=0.5, duration=2.0, integrator="undamped_newtonian")
    with pytest.warns(UserWarning, match="coarse"):
        simulate(ParticleChain((0.0, 20.0)), SQUARE, None, config, velocities=[1.0, -1.0])


def test_characteristic_times():
    lat = LatticePotential.from_intensity(1.0, 1.0)
    t_mu, t_0 = characteristic_times(DynamicsConfig(mass=2.0, friction=4.0), ONE_LINE, lat)
    assert t_mu == pytest.approx(0.5)
    assert t_0 == pytest.approx(math.sqrt(2.0 * (1.0 + 1.0)))
    assert characteristic_times(DynamicsConfig(), ONE_LINE, None) == (None, None)
