import math

import numpy as np
import pytest

from fiberbind import (
    LatticePotential,
    ParticleChain,
    ScattererParams,
    SpectralLine,
    Spectrum,
    ValidationError,
    validate_spectrum,
)


def test_spectrum_arrays_and_amplitudes():
    s = Spectrum.from_arrays([1.0, 0.5], [1.0, 2.0], [0.0, 0.1], refractive_index=2.0)
    np.testing.assert_array_equal(s.intensities, [1.0, 0.5])
    np.testing.assert_array_equal(s.wavenumbers, [1.0, 2.0])
    np.testing.assert_array_equal(s.linewidths, [0.0, 0.1])
    np.testing.assert_allclose(s.force_amplitudes, [0.5, 0.25])
    assert len(s) == 2


def test_validate_reports_every_violation():
    s = Spectrum((SpectralLine(1.0, -1.0, 0.0), SpectralLine(1.0, 1.0, -0.2)))
    result = validate_spectrum(s)
    assert not result.ok
    text = " ".join(result.violations)
    assert "wavenumber must be positive" in text
    assert "linewidth must be non-negative" in text
    with pytest.raises(ValidationError) as info:
        s.require_valid()
    assert len(info.value.violations) == 2


def test_negative_intensity_only_rejected_when_physical():
    lines = (SpectralLine(-1.0, 1.0),)
    assert validate_spectrum(Spectrum(lines)).ok
    assert not Spectrum(lines).is_nonnegative
    result = validate_spectrum(Spectrum(lines, physical=True))
    assert any("negative intensity" in v for v in result.violations)


def test_refractive_index_must_be_positive():
    assert not validate_spectrum(Spectrum((SpectralLine(1.0, 1.0),), refractive_index=0.0)).ok


def test_scatterer_amplitudes():
    p = ScattererParams(0.3)
    t, r = p.transmission, p.reflection
    assert abs(t) ** 2 + abs(r) ** 2 == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValidationError):
        ScattererParams(1.0 - 0.1j)
    with pytest.raises(ValidationError):
        ScattererParams(0.1, eta=-1.0)


def test_chain_rejects_unordered_positions_naming_pairs():
    with pytest.raises(ValidationError, match=r"\(1, 2\)"):
        ParticleChain((0.0, 2.0, 2.0))
    with pytest.raises(ValidationError):
        ParticleChain(())
    chain = ParticleChain.from_unsorted([3.0, 1.0, 2.0])
    assert chain.positions == (1.0, 2.0, 3.0)


def test_chain_helpers():
    chain = ParticleChain((0.0, 1.0, 3.0))
    assert chain.distance(0, 2) == 3.0
    assert chain.shifted(1.5).positions == (1.5, 2.5, 4.5)
    assert chain.mirrored().positions == (-3.0, -1.0, 0.0)
    assert chain.replace(1, 2.0).positions == (0.0, 2.0, 3.0)
    with pytest.raises(ValueError):
        chain.array[0] = 5.0


def test_lattice_geometry():
    lat = LatticePotential.from_intensity(1.0, wavenumber=2.0)
    assert lat.depth == pytest.approx(1.0)
    assert lat.beam_intensity() == pytest.approx(1.0)
    assert lat.well_spacing == pytest.approx(math.pi / 2)
    assert lat.well_position(3) == pytest.approx(1.5 * math.pi)
    assert lat.curvature == pytest.approx(4.0)
    chain = ParticleChain.from_wells([1, 2, 4], lat)
    np.testing.assert_allclose(chain.array, np.array([1, 2, 4]) * math.pi / 2)
