"""Shared value types for waveguide-mediated optical binding.

Units are dimensionless throughout the package: the reference wavenumber
k1 = 1, the speed of light c = 1 and the vacuum permittivity eps0 = 1.
Lengths are measured in 1/k1 (so one reference wavelength is 2*pi),
intensities in units of the reference line I1, and forces in units of
I1/(n c). With the default refractive index n = 1 a unit-intensity line
therefore produces a unit pair force at zero separation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SPEED_OF_LIGHT = 1.0
EPSILON_0 = 1.0


class FiberBindError(Exception):
    """Base class for all package errors."""

    category = "error"


class ValidationError(FiberBindError, ValueError):
    """Input violates a documented invariant."""

    category = "validation"

    def __init__(self, message: str, violations: Sequence[str] = ()):
        super().__init__(message)
        self.violations = list(violations)


class NumericalError(FiberBindError):
    category = "numerical"


class SolverError(NumericalError):
    """The scattering linear system could not be solved reliably."""

    def __init__(self, message: str, condition: float = float("nan")):
        super().__init__(message)
        self.condition = condition


class QuadratureError(NumericalError):
    """Adaptive integration failed to reach the requested tolerance."""


class ConvergenceError(NumericalError):
    """An iterative procedure exhausted its iteration budget."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class ParticleCrossingError(NumericalError):
    """Two neighbouring particles swapped order during integration."""

    def __init__(self, message: str, indices: Sequence[int] = ()):
        super().__init__(message)
        self.indices = tuple(indices)


@dataclass(frozen=True)
class SpectralLine:
    """One Lorentzian illumination line.

    ``intensity`` is the peak intensity I_m (signed values are allowed unless
    the enclosing spectrum is flagged physical), ``wavenumber`` the line
    centre k_m = n omega_m / c and ``linewidth`` the half width gamma_m, also
    in wavenumber units. A zero linewidth is a monochromatic line.
    """

    intensity: float
    wavenumber: float
    linewidth: float = 0.0


@dataclass(frozen=True)
class Spectrum:
    lines: tuple[SpectralLine, ...]
    refractive_index: float = 1.0
    physical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))

    @classmethod
    def from_arrays(cls, intensities, wavenumbers, linewidths=None,
                    refractive_index: float = 1.0, physical: bool = False) -> "Spectrum":
        intensities = np.atleast_1d(np.asarray(intensities, dtype=float))
        wavenumbers = np.atleast_1d(np.asarray(wavenumbers, dtype=float))
        if linewidths is None:
            linewidths = np.zeros_like(wavenumbers)
        linewidths = np.broadcast_to(np.asarray(linewidths, dtype=float), wavenumbers.shape)
        if intensities.shape != wavenumbers.shape:
            raise ValidationError("intensities and wavenumbers differ in length")
        lines = tuple(SpectralLine(float(i), float(k), float(g))
                      for i, k, g in zip(intensities, wavenumbers, linewidths))
        return cls(lines, refractive_index=refractive_index, physical=physical)

    @classmethod
    def single(cls, intensity: float = 1.0, wavenumber: float = 1.0,
               linewidth: float = 0.0, refractive_index: float = 1.0) -> "Spectrum":
        return cls((SpectralLine(intensity, wavenumber, linewidth),),
                   refractive_index=refractive_index)

    @cached_property
    def intensities(self) -> np.ndarray:
        return np.array([line.intensity for line in self.lines], dtype=float)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.array([line.wavenumber for line in self.lines], dtype=float)

    @cached_property
    def linewidths(self) -> np.ndarray:
        return np.array([line.linewidth for line in self.lines], dtype=float)

    @cached_property
    def force_amplitudes(self) -> np.ndarray:
        """Per-line pair-force amplitudes I_m / (n c)."""
        return self.intensities / (self.refractive_index * SPEED_OF_LIGHT)

    @cached_property
    def violations(self) -> tuple[str, ...]:
        return tuple(_spectrum_violations(self))

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.intensities >= 0.0))

    def require_valid(self) -> "Spectrum":
        if self.violations:
            raise ValidationError("invalid spectrum: " + "; ".join(self.violations),
                                  self.violations)
        return self

    def with_lines(self, lines: Iterable[SpectralLine]) -> "Spectrum":
        return Spectrum(tuple(lines), self.refractive_index, self.physical)

    def scaled(self, factor: float) -> "Spectrum":
        return self.with_lines(SpectralLine(line.intensity * factor, line.wavenumber,
                                            line.linewidth) for line in self.lines)

    def __len__(self) -> int:
        return len(self.lines)


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _spectrum_violations(spectrum: Spectrum) -> list[str]:
    problems = []
    if len(spectrum.lines) == 0:
        problems.append("spectrum must contain at least one line")
    n = spectrum.refractive_index
    if not (isinstance(n, (int, float)) and math.isfinite(n) and n > 0):
        problems.append(f"refractive_index must be positive (got {n!r})")
    for m, line in enumerate(spectrum.lines, start=1):
        if not math.isfinite(line.wavenumber) or line.wavenumber <= 0:
            problems.append(f"line {m}: wavenumber must be positive (got {line.wavenumber!r})")
        if not math.isfinite(line.linewidth) or line.linewidth < 0:
            problems.append(f"line {m}: linewidth must be non-negative (got {line.linewidth!r})")
        if not math.isfinite(line.intensity):
            problems.append(f"line {m}: intensity must be finite (got {line.intensity!r})")
        elif spectrum.physical and line.intensity < 0:
            problems.append(f"line {m}: negative intensity {line.intensity!r} "
                            "not allowed in a physical spectrum")
    return problems


def validate_spectrum(spectrum: Spectrum) -> ValidationResult:
    """Check a spectrum against its invariants without raising."""
    return ValidationResult(spectrum.violations)


@dataclass(frozen=True)
class ScattererParams:
    """Coupling of one particle to the guided modes.

    ``zeta`` is the complex polarizability (Im zeta >= 0) and ``eta`` the
    real transverse pump amplitude, shared by every particle.
    """

    zeta: complex = 0.0
    eta: float = 1.0

    def __post_init__(self):
        zeta = complex(self.zeta)
        object.__setattr__(self, "zeta", zeta)
        if not (math.isfinite(zeta.real) and math.isfinite(zeta.imag)):
            raise ValidationError(f"zeta must be finite (got {zeta!r})")
        if zeta.imag < 0:
            raise ValidationError(f"Im(zeta) must be non-negative (got {zeta.imag!r})")
        if not math.isfinite(self.eta) or self.eta < 0:
            raise ValidationError(f"eta must be finite and non-negative (got {self.eta!r})")

    @property
    def transmission(self) -> complex:
        return 1.0 / (1.0 - 1j * self.zeta)

    @property
    def reflection(self) -> complex:
        return 1j * self.zeta / (1.0 - 1j * self.zeta)


@dataclass(frozen=True)
class ParticleChain:
    """Strictly ordered particle positions along the waveguide (units 1/k1)."""

    positions: tuple[float, ...]

    def __post_init__(self):
        pos = tuple(float(x) for x in np.atleast_1d(np.asarray(self.positions, dtype=float)))
        object.__setattr__(self, "positions", pos)
        if len(pos) == 0:
            raise ValidationError("a particle chain needs at least one particle")
        if not all(math.isfinite(x) for x in pos):
            raise ValidationError("particle positions must be finite")
        bad = [j for j in range(len(pos) - 1) if not pos[j] < pos[j + 1]]
        if bad:
            raise ValidationError(
                "particle positions must be strictly increasing; offending pairs "
                + ", ".join(f"({j}, {j + 1})" for j in bad))

    @classmethod
    def from_unsorted(cls, positions: Iterable[float]) -> "ParticleChain":
        return cls(tuple(sorted(float(x) for x in positions)))

    @classmethod
    def from_wells(cls, wells: Iterable[int], lattice: "LatticePotential") -> "ParticleChain":
        return cls(tuple(lattice.well_position(z) for z in wells))

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.array(self.positions, dtype=float)
        arr.setflags(write=False)
        return arr

    def __len__(self) -> int:
        return len(self.positions)

    def distance(self, j: int, l: int) -> float:
        return abs(self.positions[l] - self.positions[j])

    def shifted(self, delta: float) -> "ParticleChain":
        return ParticleChain(tuple(x + delta for x in self.positions))

    def mirrored(self) -> "ParticleChain":
        return ParticleChain(tuple(-x for x in reversed(self.positions)))

    def replace(self, j: int, x: float) -> "ParticleChain":
        pos = list(self.positions)
        pos[j] = float(x)
        return ParticleChain(tuple(pos))


@dataclass(frozen=True)
class LatticePotential:
    """External lattice V(x) = -depth * cos^2(wavenumber * x)."""

    depth: float
    wavenumber: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.depth) or self.depth < 0:
            raise ValidationError(f"lattice depth must be non-negative (got {self.depth!r})")
        if not math.isfinite(self.wavenumber) or self.wavenumber <= 0:
            raise ValidationError(f"lattice wavenumber must be positive (got {self.wavenumber!r})")

    @classmethod
    def from_intensity(cls, intensity: float, wavenumber: float = 1.0,
                       refractive_index: float = 1.0) -> "LatticePotential":
        """Depth 2 I_V / (n k_V c) produced by counter-propagating lattice beams."""
        return cls(2.0 * intensity / (refractive_index * wavenumber * SPEED_OF_LIGHT), wavenumber)

    def beam_intensity(self, refractive_index: float = 1.0) -> float:
        """Lattice beam intensity I_V that produces this depth."""
        return 0.5 * self.depth * refractive_index * self.wavenumber * SPEED_OF_LIGHT

    @property
    def well_spacing(self) -> float:
        return math.pi / self.wavenumber

    def well_position(self, z: int) -> float:
        return z * math.pi / self.wavenumber

    @property
    def curvature(self) -> float:
        """Coefficient of Delta^2 in the harmonic expansion of one well."""
        return self.depth * self.wavenumber ** 2
