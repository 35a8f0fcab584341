"""Optical binding of particles along a single-mode waveguide.

Transverse pump light scattered into the guided mode couples particles
through distance-dependent forces. The package computes these forces
exactly (transfer matrices) and in the weak-coupling limit (closed-form
pair forces), designs illumination spectra for target force profiles,
integrates particle dynamics and searches lattice configurations for
minimum energy.
"""

__version__ = "0.1.0"

from .core_types import (
    EPSILON_0,
    SPEED_OF_LIGHT,
    ConvergenceError,
    FiberBindError,
    LatticePotential,
    NumericalError,
    ParticleChain,
    ParticleCrossingError,
    QuadratureError,
    ScattererParams,
    SolverError,
    SpectralLine,
    Spectrum,
    ValidationError,
    ValidationResult,
    validate_spectrum,
)
from .dynamics import DynamicsConfig, Trajectory, characteristic_times, simulate, total_energy
from .optimizer import RankedConfig, enumerate_well_configs, landscape_scan, local_relax
from .pair_interactions import (
    chain_forces,
    harmonic_expansion,
    lorentzian_density,
    pair_force,
    pair_potential,
    spectral_force_density,
    total_forces,
    total_potential,
)
from .spectral_designer import (
    PRESET_NAMES,
    DiscardedMeanWarning,
    TargetProfile,
    cosine_coefficients,
    evaluate_design,
    preset_spectrum,
)
from .transfer_matrix import (
    FieldState,
    QuadratureConfig,
    beam_splitter_matrix,
    forces_at_wavenumbers,
    solve_fields,
    total_force_exact,
    weak_coupling_forces,
)
