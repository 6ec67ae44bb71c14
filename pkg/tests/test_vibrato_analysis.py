import numpy as np
import pytest
from pydantic import ValidationError

from conftest import FRAME_RATE, flat, with_vibrato
from pitchFunctions.errors import DegenerateContourError, EmptyCorpusError
from pitchFunctions.signal_io import F0Contour
from pitchFunctions.style_engine import ScalingSpec, VibratoParams, decompose, recompose, vibrato_modulation
from pitchFunctions.wavelet import dwt, reconstruct_band
from pitchFunctions.vibrato_analysis import (
    DetectorConfig,
    estimate,
    extent_cents,
    level_energy_capture,
    longest_voiced_run,
    style_accuracy,
)


def jittered(cents_rms: float = 3.0, seed: int = 0) -> F0Contour:
    contour = flat()
    jitter = np.random.default_rng(seed).normal(0.0, cents_rms, len(contour))
    return F0Contour.from_hz(contour.f0_hz * 2 ** (jitter / 1200), FRAME_RATE)


def test_six_hertz_vibrato_is_detected(vibrato_contour):
    result = estimate(vibrato_contour)
    assert result.rate == pytest.approx(6.0, abs=0.5)
    assert result.extent_cents == pytest.approx(50.0, abs=10.0)
    assert result.band_energy_fraction >= 0.5
    assert result.label == "vibrato"


def test_flat_contour_is_straight(flat_contour):
    result = estimate(flat_contour)
    assert result.label == "straight"
    assert result.extent_cents == pytest.approx(0.0, abs=1e-6)
    assert result.rate == 0.0


def test_jitter_is_straight():
    result = estimate(jittered())
    assert result.extent_cents < 20.0
    assert result.label == "straight"


def test_scaled_down_vibrato_is_straight(vibrato_contour):
    weak = recompose(decompose(vibrato_contour), ScalingSpec(global_factor=0.1))
    assert estimate(weak).label == "straight"


@pytest.mark.parametrize("rate,extent", [(5.0, 30.0), (6.5, 80.0), (8.0, 120.0)])
def test_rate_and_extent_accuracy(rate, extent):
    result = estimate(with_vibrato(flat(), rate=rate, extent=extent))
    assert result.rate == pytest.approx(rate, abs=0.5)
    assert result.extent_cents == pytest.approx(extent, rel=0.2)


def test_rate_does_not_depend_on_phase():
    rates = [estimate(with_vibrato(flat(), phase=phase)).rate for phase in (0.0, 1.0, 2.0, 3.0)]
    assert max(rates) - min(rates) <= 0.2


def test_estimate_uses_longest_voiced_run():
    contour = with_vibrato(flat())
    voiced = contour.voiced.copy()
    voiced[:60] = False
    gapped = F0Contour(np.where(voiced, contour.f0_hz, 0.0), voiced, FRAME_RATE)
    assert estimate(gapped).label == "vibrato"


def test_short_window_rejected():
    with pytest.raises(DegenerateContourError):
        estimate(flat(frames=40))
    with pytest.raises(DegenerateContourError):
        estimate(flat(), window=(0, 20))


def test_window_must_be_voiced():
    contour = F0Contour(np.r_[np.full(100, 220.0), 0.0], np.r_[np.ones(100, bool), False], FRAME_RATE)
    with pytest.raises(DegenerateContourError):
        estimate(contour, window=(0, 101))


def test_longest_voiced_run():
    assert longest_voiced_run(np.array([False, True, True, False, True, True, True])) == (4, 7)
    assert longest_voiced_run(np.zeros(5, dtype=bool)) == (0, 0)
    assert longest_voiced_run(np.ones(3, dtype=bool)) == (0, 3)


def test_extent_of_sinusoid():
    depth = 50.0 / 1200 * np.log(2.0)
    high = depth * np.sin(2 * np.pi * np.arange(1000) / 20.0)
    assert extent_cents(high) == pytest.approx(50.0, rel=1e-6)


def test_detector_config_validation():
    with pytest.raises(ValidationError):
        DetectorConfig(rate_range_hz=(9.0, 4.0))
    with pytest.raises(ValidationError):
        DetectorConfig(min_band_fraction=1.5)


def test_threshold_is_configurable(vibrato_contour):
    assert estimate(vibrato_contour, config=DetectorConfig(extent_threshold_cents=80.0)).label == "straight"


def modulated(rate: float, extent: float = 50.0, frames: int = 384):
    modulation = vibrato_modulation(frames, FRAME_RATE, VibratoParams(rate=rate, extent=extent))
    return F0Contour.from_hz(220.0 * np.exp(modulation), FRAME_RATE), modulation


def test_level_four_captures_five_hertz():
    contour, modulation = modulated(5.0)
    assert level_energy_capture(contour, 4, modulation) >= 0.9


def test_level_three_leaks_five_hertz():
    contour, modulation = modulated(5.0)
    assert level_energy_capture(contour, 3, modulation) <= 0.6


def test_slow_drift_stays_in_low_band():
    contour, modulation = modulated(0.5)
    assert level_energy_capture(contour, 4, modulation) <= 0.2


def test_capture_does_not_depend_on_extent():
    small_contour, small_modulation = modulated(5.0, extent=20.0)
    large_contour, large_modulation = modulated(5.0, extent=100.0)
    small = level_energy_capture(small_contour, 4, small_modulation)
    large = level_energy_capture(large_contour, 4, large_modulation)
    assert small == pytest.approx(large, rel=1e-6)


def test_extent_scales_with_factor(vibrato_contour):
    bands = decompose(vibrato_contour)
    reference = estimate(vibrato_contour).extent_cents
    for alpha in np.linspace(0.1, 2.0, 20):
        scaled = estimate(recompose(bands, ScalingSpec(global_factor=alpha))).extent_cents
        assert scaled == pytest.approx(alpha * reference, rel=0.05)


@pytest.mark.parametrize("levels", [3, 4])
def test_capture_is_projection_energy_ratio(levels):
    contour, modulation = modulated(5.0)
    high = reconstruct_band(dwt(np.log(contour.f0_hz), levels), "high")
    projection = np.dot(high, modulation) / np.dot(modulation, modulation) * modulation
    expected = np.dot(projection, projection) / np.dot(modulation, modulation)
    assert level_energy_capture(contour, levels, modulation) == pytest.approx(min(expected, 1.0), rel=1e-9)


def test_inverted_modulation_is_not_captured():
    contour, modulation = modulated(5.0)
    assert level_energy_capture(contour, 4, -modulation) == 0.0


def test_capture_rejects_bad_modulation(flat_contour):
    with pytest.raises(DegenerateContourError):
        level_energy_capture(flat_contour, 4, np.zeros(len(flat_contour)))
    with pytest.raises(DegenerateContourError):
        level_energy_capture(flat_contour, 4, np.ones(10))


def test_style_accuracy_and_flipped_labels():
    corpus = [
        (with_vibrato(flat(), rate=6.0, extent=60.0), "vibrato"),
        (flat(), "straight"),
        (jittered(seed=1), "straight"),
        (with_vibrato(flat(), rate=5.5, extent=40.0), "straight"),
    ]
    flipped = [(contour, "straight" if label == "vibrato" else "vibrato") for contour, label in corpus]
    accuracy = style_accuracy(corpus)
    assert accuracy == pytest.approx(0.75)
    assert accuracy + style_accuracy(flipped) == pytest.approx(1.0)


def test_style_accuracy_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        style_accuracy([])
