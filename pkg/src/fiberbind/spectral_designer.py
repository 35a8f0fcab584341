"""Fourier synthesis of pair-force profiles from illumination spectra.

A set of monochromatic lines on a harmonic grid k_m = m * 2 pi / P turns the
pair force into a pure cosine series with coefficients I_m / (n c), so any
even, zero-mean periodic profile can be approximated. Linewidths then damp
individual harmonics with distance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .core_types import SPEED_OF_LIGHT, SpectralLine, Spectrum, ValidationError
from .pair_interactions import pair_force

PRESET_NAMES = ("triangle", "square", "gaussian_cluster", "lorentz_comb")
TARGET_NAMES = PRESET_NAMES


class DiscardedMeanWarning(UserWarning):
    """The target has a non-zero mean, which no spectrum can produce."""

    def __init__(self, mean: float):
        super().__init__(f"target mean {mean:.6g} cannot be synthesized and was dropped")
        self.mean = mean


def _wrap(d, period):
    """Map distances onto [-P/2, P/2)."""
    return np.mod(np.asarray(d, dtype=float) + 0.5 * period, period) - 0.5 * period


def _triangle(d, period, params):
    return 1.0 - 4.0 * np.abs(_wrap(d, period)) / period


def _square(d, period, params):
    return np.sign(np.cos(2.0 * np.pi * np.asarray(d, dtype=float) / period))


def _gaussian_cluster(d, period, params):
    width = params.get("width", period / 20.0)
    u = _wrap(d, period)
    # images beyond +-3 periods are below double precision for width <= P/4
    return sum(np.exp(-0.5 * ((u - s * period) / width) ** 2) for s in range(-3, 4))


def _lorentz_comb(d, period, params):
    # periodized Lorentzian peaks of half width w, normalized to 1 at d = 0
    width = params.get("width", period / 20.0)
    a = 2.0 * np.pi * width / period
    theta = 2.0 * np.pi * np.asarray(d, dtype=float) / period
    return (np.cosh(a) - 1.0) / (np.cosh(a) - np.cos(theta))


_CLOSED_FORMS: dict[str, Callable] = {
    "triangle": _triangle,
    "square": _square,
    "gaussian_cluster": _gaussian_cluster,
    "lorentz_comb": _lorentz_comb,
}


@dataclass(frozen=True)
class TargetProfile:
    """Desired pair force over one period.

    Either ``name`` selects a closed form (with optional ``params``) or
    ``samples`` holds values on the uniform grid d_i = i * P / len(samples),
    i = 0 .. len-1. Only the even part of the profile can be realized.
    """

    period: float = 2.0 * math.pi
    name: Optional[str] = None
    samples: Optional[np.ndarray] = None
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.period > 0:
            raise ValidationError("target period must be positive")
        if (self.name is None) == (self.samples is None):
            raise ValidationError("give exactly one of a named profile or samples")
        if self.name is not None and self.name not in _CLOSED_FORMS:
            raise ValidationError(f"unknown target profile {self.name!r}; "
                                  f"choose from {', '.join(_CLOSED_FORMS)}")
        if self.samples is not None:
            arr = np.asarray(self.samples, dtype=float)
            if arr.ndim != 1 or arr.size < 2:
                raise ValidationError("target samples must be a 1-D array of length >= 2")
            if not np.all(np.isfinite(arr)):
                raise ValidationError("target samples contain NaN or infinite values")
            object.__setattr__(self, "samples", arr)

    @classmethod
    def from_function(cls, func: Callable, period: float = 2.0 * math.pi,
                      samples: int = 4096) -> "TargetProfile":
        d = np.arange(samples) * period / samples
        return cls(period=period, samples=np.asarray(func(d), dtype=float))

    def __call__(self, d) -> np.ndarray:
        if self.name is not None:
            return _CLOSED_FORMS[self.name](d, self.period, dict(self.params))
        # periodic linear interpolation of the samples
        n = self.samples.size
        grid = np.arange(n + 1) * self.period / n
        vals = np.append(self.samples, self.samples[0])
        return np.interp(np.mod(np.asarray(d, dtype=float), self.period), grid, vals)

    def sampled(self, samples: int) -> np.ndarray:
        if self.samples is not None and samples == self.samples.size:
            return self.samples
        return np.asarray(self(np.arange(samples) * self.period / samples), dtype=float)


def profile_mean(target: TargetProfile, samples: int = 4096) -> float:
    return float(np.mean(target.sampled(samples)))


def cosine_coefficients(target: TargetProfile, m_max: int, samples: int = 4096,
                        refractive_index: float = 1.0) -> Spectrum:
    """Monochromatic spectrum whose pair force is the truncated cosine series.

    Coefficients a_m = (2/P) int f(d) cos(m 2 pi d / P) dd are computed with
    the periodic trapezoid rule, which is exact for band-limited samples. The
    mean of the target is removed; when it is non-negligible a
    ``DiscardedMeanWarning`` carrying the value is issued.
    """
    if m_max < 1:
        raise ValidationError("m_max must be at least 1")
    if samples < 2 * m_max + 1:
        raise ValidationError(f"need at least {2 * m_max + 1} samples for m_max={m_max}")
    if target.samples is not None:
        values = target.samples
        samples = values.size
        if samples < 2 * m_max + 1:
            raise ValidationError(f"need at least {2 * m_max + 1} samples for m_max={m_max}")
    else:
        values = target.sampled(samples)
    if not np.all(np.isfinite(values)):
        raise ValidationError("target contains NaN or infinite values")
    mean = float(np.mean(values))
    if abs(mean) > 1e-12 * max(1.0, float(np.max(np.abs(values)))):
        warnings.warn(DiscardedMeanWarning(mean), stacklevel=2)
    m = np.arange(1, m_max + 1)
    phase = 2.0 * np.pi * np.outer(m, np.arange(samples)) / samples
    a = 2.0 / samples * (np.cos(phase) @ values)
    k0 = 2.0 * np.pi / target.period
    nc = refractive_index * SPEED_OF_LIGHT
    lines = tuple(SpectralLine(float(nc * am), float(mm * k0), 0.0) for mm, am in zip(m, a))
    return Spectrum(lines, refractive_index=refractive_index)


def _square_intensity(m: int) -> float:
    # sin(m pi / 2) without rounding residue at even m
    return (0.0, 1.0, 0.0, -1.0)[m % 4] / m


def preset_spectrum(name: str, m_max: Optional[int] = None, broadened: bool = False,
                    refractive_index: float = 1.0) -> Spectrum:
    """Line lists of the four designed pair-force profiles.

    ``broadened`` selects the finite-linewidth variant of each profile.
    Intensities are in units of I1 and wavenumbers in units of k1.
    """
    if name not in PRESET_NAMES:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    if m_max is None:
        m_max = 20 if name == "gaussian_cluster" else 10
    if m_max < 1:
        raise ValidationError("m_max must be at least 1")
    lines = []
    for m in range(1, m_max + 1):
        if name == "triangle":
            intensity, k = 1.0 / (2 * m - 1) ** 2, float(2 * m - 1)
            gamma = 0.1 if (broadened and m == 1) else 0.0
        elif name == "square":
            intensity, k = _square_intensity(m), float(m)
            gamma = 0.1 * (1.0 - 1.0 / m) if broadened else 0.0
        elif name == "gaussian_cluster":
            intensity = math.exp(-(m - 10) ** 2 / 10.0) * math.exp(8.1)
            k = 1.0 + 0.1 * m
            gamma = 0.1 * m if (broadened and not 9 <= m <= 12) else 0.0
        else:
            intensity, k = 1.0 - (m - 1) / 10.0, float(m)
            gamma = 0.03 * m if broadened else 0.0
        lines.append(SpectralLine(intensity, k, gamma))
    return Spectrum(tuple(lines), refractive_index=refractive_index)


@dataclass(frozen=True)
class DesignReport:
    grid: np.ndarray
    achieved: np.ndarray
    target: np.ndarray
    errors: np.ndarray
    l2: float
    linf: float
    overshoot: float
    physical: bool


def evaluate_design(spectrum: Spectrum, target: TargetProfile, grid,
                    remove_mean: bool = True) -> DesignReport:
    """Compare the pair force of ``spectrum`` with ``target`` on ``grid``.

    ``l2`` is the root-mean-square error over the grid points, ``linf`` the
    largest pointwise error. ``overshoot`` is how far the achieved force
    rises above the target's maximum, as a fraction of the target's
    peak-to-peak range (the Gibbs overshoot for a square wave). By default
    the target's mean is subtracted first since it cannot be synthesized.
    """
    d = np.asarray(grid, dtype=float)
    achieved = np.asarray(pair_force(d, spectrum), dtype=float)
    wanted = np.asarray(target(d), dtype=float)
    if remove_mean:
        wanted = wanted - profile_mean(target)
    err = achieved - wanted
    span = float(np.max(wanted) - np.min(wanted))
    overshoot = (float(np.max(achieved)) - float(np.max(wanted))) / span if span > 0 else float("nan")
    return DesignReport(
        grid=d, achieved=achieved, target=wanted, errors=err,
        l2=float(np.sqrt(np.mean(err ** 2))),
        linf=float(np.max(np.abs(err))),
        overshoot=overshoot,
        physical=spectrum.is_nonnegative,
    )
