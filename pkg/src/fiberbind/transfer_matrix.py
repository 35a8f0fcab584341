"""Exact monochromatic fields and forces for a chain of beam splitters.

Each particle relates the guided amplitudes on its left (A outgoing to the
left, B incoming from the left) to those on its right (C incoming from the
right, D outgoing to the right) through a 3x3 matrix that also injects the
transverse pump amplitude eta. Instead of multiplying transfer matrices the
solver assembles all 4N amplitudes into one sparse linear system, which
stays well conditioned for long chains.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core_types import (
    EPSILON_0,
    ParticleChain,
    QuadratureError,
    ScattererParams,
    SolverError,
    Spectrum,
    ValidationError,
)

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

# chains up to this size are solved as stacked dense systems
_DENSE_LIMIT = 32
_BATCH = 2048


def beam_splitter_matrix(params: ScattererParams) -> np.ndarray:
    z = params.zeta
    return np.array([
        [1 + 1j * z, 1j * z, (1 - 1j * z) / SQRT2],
        [-1j * z, 1 - 1j * z, (1j * z - 1) / SQRT2],
        [0, 0, 1],
    ], dtype=complex)


def propagation_matrix(wavenumber: float, distance: float) -> np.ndarray:
    if distance < 0:
        raise ValidationError(f"propagation distance must be non-negative (got {distance!r})")
    if wavenumber <= 0:
        raise ValidationError(f"wavenumber must be positive (got {wavenumber!r})")
    phase = np.exp(1j * wavenumber * distance)
    return np.diag([phase, 1.0 / phase, 1.0]).astype(complex)


@dataclass(frozen=True)
class FieldState:
    """Guided-mode amplitudes around every particle at one wavenumber.

    ``amplitudes`` has shape (N, 4) with columns A, B, C, D.
    """

    positions: np.ndarray
    wavenumber: float
    amplitudes: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return self.amplitudes[:, 0]

    @property
    def B(self) -> np.ndarray:
        return self.amplitudes[:, 1]

    @property
    def C(self) -> np.ndarray:
        return self.amplitudes[:, 2]

    @property
    def D(self) -> np.ndarray:
        return self.amplitudes[:, 3]

    def __len__(self) -> int:
        return len(self.amplitudes)

    def forces(self) -> np.ndarray:
        return _stress_forces(self.amplitudes)

    def momentum_flux_difference(self) -> float:
        """Momentum flux entering from the left minus that leaving on the right."""
        a = np.abs(self.amplitudes) ** 2
        return 0.5 * EPSILON_0 * (a[0, 0] + a[0, 1] - a[-1, 2] - a[-1, 3])


def _stress_forces(amplitudes: np.ndarray) -> np.ndarray:
    a = np.abs(amplitudes) ** 2
    return 0.5 * EPSILON_0 * (a[..., 0] + a[..., 1] - a[..., 2] - a[..., 3])


def _system_pattern(n: int):
    """Row, column and coefficient-kind arrays of the global system.

    Kinds: 0 -> 1, 1 -> -(1 + i zeta), 2 -> -i zeta, 3 -> i zeta,
    4 -> -(1 - i zeta), 5 -> -exp(i k d_gap).
    """
    rows, cols, kinds, gaps = [], [], [], []

    def put(r, c, kind, gap=-1):
        rows.append(r)
        cols.append(c)
        kinds.append(kind)
        gaps.append(gap)

    r = 0
    for j in range(n):
        a, b, c, d = 4 * j, 4 * j + 1, 4 * j + 2, 4 * j + 3
        put(r, a, 0), put(r, c, 1), put(r, d, 2)
        r += 1
        put(r, b, 0), put(r, c, 3), put(r, d, 4)
        r += 1
    for j in range(n - 1):
        # left-moving wave: C_j = e^{ikd} A_{j+1}; right-moving: B_{j+1} = e^{ikd} D_j
        put(r, 4 * j + 2, 0), put(r, 4 * (j + 1), 5, j)
        r += 1
        put(r, 4 * (j + 1) + 1, 0), put(r, 4 * j + 3, 5, j)
        r += 1
    put(r, 1, 0)
    r += 1
    put(r, 4 * (n - 1) + 2, 0)
    return (np.array(rows), np.array(cols), np.array(kinds), np.array(gaps))


def _coefficients(kinds, gaps, zeta: complex, phases: np.ndarray) -> np.ndarray:
    """Matrix entries for one or many wavenumbers (``phases`` shape (..., N-1))."""
    base = np.array([1.0, -(1 + 1j * zeta), -1j * zeta, 1j * zeta, -(1 - 1j * zeta), 0.0],
                    dtype=complex)
    vals = np.broadcast_to(base[kinds], phases.shape[:-1] + kinds.shape).copy()
    gap_mask = kinds == 5
    if np.any(gap_mask):
        vals[..., gap_mask] = -phases[..., gaps[gap_mask]]
    return vals


def _rhs(n: int, zeta: complex, eta: float, inject_left: complex, inject_right: complex) -> np.ndarray:
    rhs = np.zeros(4 * n, dtype=complex)
    rhs[0:2 * n:2] = eta * (1 - 1j * zeta) / SQRT2
    rhs[1:2 * n:2] = eta * (1j * zeta - 1) / SQRT2
    rhs[-2] = inject_left
    rhs[-1] = inject_right
    return rhs


def assemble_system(chain: ParticleChain, params: ScattererParams, wavenumber: float,
                    inject_left: complex = 0.0, inject_right: complex = 0.0):
    """Sparse matrix and right-hand side of the 4N-amplitude problem."""
    x = chain.array
    n = len(x)
    rows, cols, kinds, gaps = _system_pattern(n)
    phases = np.exp(1j * wavenumber * np.diff(x))
    vals = _coefficients(kinds, gaps, params.zeta, phases)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(4 * n, 4 * n))
    return mat, _rhs(n, params.zeta, params.eta, inject_left, inject_right)


def solve_fields(chain: ParticleChain, params: ScattererParams, wavenumber: float,
                 inject_left: complex = 0.0, inject_right: complex = 0.0) -> FieldState:
    """Solve for all guided amplitudes at one wavenumber.

    By default no light is fed into the waveguide from either end, so all
    guided light originates from the pump. ``inject_left`` and
    ``inject_right`` set the incoming amplitudes B_1 and C_N instead.
    """
    if wavenumber <= 0 or not math.isfinite(wavenumber):
        raise ValidationError(f"wavenumber must be positive (got {wavenumber!r})")
    return _solve_sparse(chain, params, wavenumber, inject_left, inject_right)


def _solve_sparse(chain, params, wavenumber, inject_left=0.0, inject_right=0.0) -> FieldState:
    mat, rhs = assemble_system(chain, params, wavenumber, inject_left, inject_right)
    with np.errstate(all="ignore"):
        try:
            sol = spla.spsolve(mat.tocsc(), rhs)
        except RuntimeError as exc:
            raise SolverError(f"scattering system is singular: {exc}", _condition(mat)) from exc
    residual = np.linalg.norm(mat @ sol - rhs)
    scale = np.linalg.norm(rhs) + 1e-300
    if not np.all(np.isfinite(sol)) or residual > 1e-8 * max(scale, np.linalg.norm(sol)):
        raise SolverError(f"scattering system is singular or ill conditioned at k={wavenumber}",
                          _condition(mat))
    return FieldState(chain.array, float(wavenumber), sol.reshape(len(chain), 4))


def _condition(mat) -> float:
    if mat.shape[0] > 800:
        return float("nan")
    with np.errstate(all="ignore"):
        return float(np.linalg.cond(mat.toarray()))


def force_per_frequency(state: FieldState, particle_index: int) -> float:
    if not 0 <= particle_index < len(state):
        raise IndexError(f"particle index {particle_index} out of range for {len(state)} particles")
    return float(state.forces()[particle_index])


def forces_at_wavenumbers(chain: ParticleChain, params: ScattererParams, wavenumbers) -> np.ndarray:
    """Exact per-frequency forces for many wavenumbers, shape (len(k), N)."""
    ks = np.atleast_1d(np.asarray(wavenumbers, dtype=float))
    n = len(chain)
    if n > _DENSE_LIMIT:
        return np.array([_solve_sparse(chain, params, k).forces() for k in ks])
    rows, cols, kinds, gaps = _system_pattern(n)
    gap_lengths = np.diff(chain.array)
    rhs = _rhs(n, params.zeta, params.eta, 0.0, 0.0)
    out = np.empty((ks.size, n))
    for start in range(0, ks.size, _BATCH):
        kb = ks[start:start + _BATCH]
        phases = np.exp(1j * np.multiply.outer(kb, gap_lengths))
        vals = _coefficients(kinds, gaps, params.zeta, phases)
        mats = np.zeros((kb.size, 4 * n, 4 * n), dtype=complex)
        mats[:, rows, cols] = vals
        try:
            sol = np.linalg.solve(mats, np.broadcast_to(rhs, (kb.size, 4 * n))[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"scattering system is singular: {exc}",
                              float(np.max(np.linalg.cond(mats)))) from exc
        if not np.all(np.isfinite(sol)):
            raise SolverError("scattering system produced non-finite amplitudes",
                              float(np.max(np.linalg.cond(mats))))
        out[start:start + kb.size] = _stress_forces(sol.reshape(kb.size, n, 4))
    return out


@dataclass(frozen=True)
class QuadratureConfig:
    """Integration settings for broadened lines.

    Each line is integrated over ``window`` half widths on either side of
    its centre. ``domain='full'`` lets the window extend to negative
    wavenumbers, matching the closed-form pair force which integrates the
    Lorentzian over the whole real axis; ``'positive'`` clips at k = 0.
    Panels of ``nodes``-point Gauss-Legendre rules are bisected until the
    estimated error is below ``rtol`` (relative) or ``atol`` (absolute),
    at most ``max_depth`` times.
    """

    window: float = 40.0
    rtol: float = 1e-8
    atol: float = 1e-13
    max_depth: int = 30
    nodes: int = 16
    domain: str = "full"

    def __post_init__(self):
        if self.window <= 0:
            raise ValidationError("quadrature window must be positive")
        if self.rtol <= 0 or self.atol < 0:
            raise ValidationError("quadrature tolerances must be positive")
        if self.max_depth < 1 or self.nodes < 2:
            raise ValidationError("max_depth must be >= 1 and nodes >= 2")
        if self.domain not in ("full", "positive"):
            raise ValidationError(f"unknown quadrature domain {self.domain!r}")


def _adaptive_lorentzian(func, center: float, width: float, lo_angle: float, hi_angle: float,
                         config: QuadratureConfig, initial_panels: int) -> np.ndarray:
    """Integrate ``func(k)`` against a unit-mass Lorentzian.

    With k = center + width * tan(theta) the Lorentzian measure becomes
    d theta / pi, so the panels live on a bounded angle interval.
    """
    nodes, weights = np.polynomial.legendre.leggauss(config.nodes)

    def rule(a, b):
        half = 0.5 * (b - a)
        theta = 0.5 * (a + b)[:, None] + half[:, None] * nodes
        vals = func(center + width * np.tan(theta.ravel()))
        vals = vals.reshape(theta.shape + vals.shape[1:])
        return np.einsum("pq,pq...->p...", half[:, None] * weights, vals) / np.pi

    edges = np.linspace(lo_angle, hi_angle, initial_panels + 1)
    a, b = edges[:-1], edges[1:]
    coarse = rule(a, b)
    total = np.zeros(coarse.shape[1:])
    for depth in range(config.max_depth + 1):
        mid = 0.5 * (a + b)
        left, right = rule(a, mid), rule(mid, b)
        fine = left + right
        err = np.abs(fine - coarse)
        err = err.reshape(len(a), -1).max(axis=1)
        estimate = total + fine.sum(axis=0)
        tol = max(config.atol, config.rtol * float(np.max(np.abs(estimate))))
        share = tol * (b - a) / (hi_angle - lo_angle)
        done = err <= share
        total = total + fine[done].sum(axis=0)
        if np.all(done):
            return total
        if depth == config.max_depth:
            break
        keep = ~done
        a_k, m_k, b_k = a[keep], mid[keep], b[keep]
        a = np.concatenate([a_k, m_k])
        b = np.concatenate([m_k, b_k])
        coarse = np.concatenate([left[keep], right[keep]])
    raise QuadratureError(
        f"quadrature did not converge after {config.max_depth} refinements "
        f"(worst panel error {float(err.max()):.3g}, tolerance {tol:.3g})")


def total_force_exact(chain: ParticleChain, params: ScattererParams, spectrum: Spectrum,
                      quadrature: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Spectrally integrated exact force on every particle.

    The force at each wavenumber is computed with pump amplitude ``eta`` and
    weighted by the line's normalized Lorentzian times I_m/(n c), with the
    stress-tensor factor eps0/2 divided out. In the zeta -> 0 limit with
    eta = 1 this reproduces ``pair_interactions.chain_forces`` exactly (for an
    infinite window). Monochromatic lines contribute their force at k_m.
    """
    spectrum.require_valid()
    config = quadrature or QuadratureConfig()
    n = len(chain)
    total = np.zeros(n)
    if params.eta == 0:
        return total
    span = chain.positions[-1] - chain.positions[0]

    def func(k):
        return forces_at_wavenumbers(chain, params, k) * (2.0 / EPSILON_0)

    for line, amp in zip(spectrum.lines, spectrum.force_amplitudes):
        if amp == 0:
            continue
        k_m, g = line.wavenumber, line.linewidth
        if g == 0:
            total += amp * func(np.array([k_m]))[0]
            continue
        hi = math.atan(config.window)
        lo = -hi
        if config.domain == "positive":
            lo = max(lo, math.atan(-k_m / g))
        # resolve roughly one oscillation of exp(i k span) per initial panel
        oscillations = 2.0 * config.window * g * span / (2.0 * math.pi)
        panels = int(min(4096, max(8, math.ceil(oscillations))))
        total += amp * _adaptive_lorentzian(func, k_m, g, lo, hi, config, panels)
    log.debug("exact forces %s", total)
    return total


def weak_coupling_forces(chain: ParticleChain, params: ScattererParams, wavenumber: float) -> np.ndarray:
    """Pairwise per-frequency forces of the zeta -> 0 limit.

    Amplitude eta corresponds to intensity eta^2 c eps0 / 2, giving
    (eps0/2) eta^2 (sum_{l>j} cos(k d_jl) - sum_{l<j} cos(k d_jl)).
    """
    x = chain.array
    d = x[None, :] - x[:, None]
    return 0.5 * EPSILON_0 * params.eta ** 2 * (np.sign(d) * np.cos(wavenumber * d)).sum(axis=1)
