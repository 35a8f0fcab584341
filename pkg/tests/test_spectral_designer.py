import math
import warnings

import numpy as np
import pytest

from fiberbind import (
    PRESET_NAMES,
    DiscardedMeanWarning,
    SpectralLine,
    Spectrum,
    TargetProfile,
    ValidationError,
    cosine_coefficients,
    evaluate_design,
    pair_force,
    preset_spectrum,
)
from fiberbind.spectral_designer import profile_mean


def test_round_trip_recovers_intensities():
    rng = np.random.default_rng(11)
    period = 3.0
    k0 = 2 * math.pi / period
    intensities = rng.uniform(-1, 1, 8)
    spectrum = Spectrum.from_arrays(intensities, k0 * np.arange(1, 9))
    target = TargetProfile.from_function(lambda d: pair_force(d, spectrum), period, samples=64)
    design = cosine_coefficients(target, 8)
    np.testing.assert_allclose(design.intensities, intensities, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(design.wavenumbers, spectrum.wavenumbers, rtol=1e-14)


def test_refractive_index_rescales_intensities():
    target = TargetProfile(name="triangle")
    a = cosine_coefficients(target, 5)
    b = cosine_coefficients(target, 5, refractive_index=1.5)
    np.testing.assert_allclose(b.intensities, 1.5 * a.intensities)
    np.testing.assert_allclose(pair_force(1.2, a), pair_force(1.2, b), rtol=1e-13)


def test_designer_is_linear():
    f = TargetProfile(name="triangle")
    g = TargetProfile(name="lorentz_comb")
    both = TargetProfile.from_function(lambda d: 2.0 * f(d) - 0.5 * g(d), samples=4096)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DiscardedMeanWarning)
        cf = cosine_coefficients(f, 12).intensities
        cg = cosine_coefficients(g, 12).intensities
        cb = cosine_coefficients(both, 12).intensities
    np.testing.assert_allclose(cb, 2.0 * cf - 0.5 * cg, atol=1e-12)


def test_odd_profiles_have_no_cosine_content():
    target = TargetProfile.from_function(lambda d: np.sin(d) + 0.3 * np.sin(3 * d))
    assert np.max(np.abs(cosine_coefficients(target, 6).intensities)) < 1e-13


def test_error_decreases_with_more_harmonics():
    target = TargetProfile(name="triangle")
    grid = np.linspace(0, 4 * math.pi, 2001)
    errors = [evaluate_design(cosine_coefficients(target, m), target, grid).l2 for m in (1, 3, 5, 9, 17)]
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_mean_is_reported_and_dropped():
    target = TargetProfile(name="gaussian_cluster")
    with pytest.warns(DiscardedMeanWarning) as record:
        spectrum = cosine_coefficients(target, 20)
    assert record[0].message.mean == pytest.approx(profile_mean(target), rel=1e-12)
    report = evaluate_design(spectrum, target, np.linspace(0, 2 * math.pi, 1001))
    assert abs(np.mean(report.target)) < 0.05


def test_target_validation():
    with pytest.raises(ValidationError):
        TargetProfile(name="sawtooth")
    with pytest.raises(ValidationError):
        TargetProfile(samples=np.array([1.0, np.nan, 0.0]))
    with pytest.raises(ValidationError):
        TargetProfile()
    with pytest.raises(ValidationError):
        cosine_coefficients(TargetProfile(samples=np.ones(8)), 10)


def test_sampled_profile_interpolates_periodically():
    target = TargetProfile(period=4.0, samples=np.array([0.0, 1.0, 0.0, -1.0]))
    assert target(0.5) == pytest.approx(0.5)
    assert target(4.5) == pytest.approx(0.5)
    assert target(3.5) == pytest.approx(-0.5)


def test_preset_lines():
    tri = preset_spectrum("triangle")
    np.testing.assert_allclose(tri.wavenumbers, 2 * np.arange(1, 11) - 1)
    np.testing.assert_allclose(tri.intensities, 1.0 / (2 * np.arange(1, 11) - 1) ** 2)
    sq = preset_spectrum("square")
    assert np.all(sq.intensities[1::2] == 0.0)
    np.testing.assert_allclose(sq.intensities[::2], [(-1) ** j / (2 * j + 1) for j in range(5)])
    broad = preset_spectrum("square", broadened=True)
    np.testing.assert_allclose(broad.linewidths, 0.1 * (1 - 1 / np.arange(1, 11)))
    gauss = preset_spectrum("gaussian_cluster", broadened=True)
    assert len(gauss) == 20
    assert np.all(gauss.linewidths[8:12] == 0) and gauss.linewidths[0] == pytest.approx(0.1)
    for name in PRESET_NAMES:
        assert preset_spectrum(name).linewidths.max() == 0
        assert preset_spectrum(name, broadened=True).linewidths.max() > 0
    with pytest.raises(ValidationError):
        preset_spectrum("sine")


def test_report_fields():
    target = TargetProfile(name="square")
    spectrum = cosine_coefficients(target, 10)
    report = evaluate_design(spectrum, target, np.linspace(0, 2 * math.pi, 501))
    assert report.physical is False
    assert report.linf >= report.l2 > 0
    assert report.errors.shape == (501,)
    assert evaluate_design(preset_spectrum("triangle"), TargetProfile(name="triangle"),
                           np.linspace(0, 1, 5)).physical


def test_broadening_damps_far_harmonics():
    sharp = Spectrum((SpectralLine(1.0, 1.0),))
    broad = Spectrum((SpectralLine(1.0, 1.0, 0.1),))
    d = 20 * math.pi
    assert pair_force(d, broad) == pytest.approx(math.exp(-0.1 * d) * pair_force(d, sharp))
