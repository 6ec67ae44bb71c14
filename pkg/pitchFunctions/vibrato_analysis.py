"""
Rule-based vibrato detection on the high log-F0 band.

A window is labelled vibrato when its high band is large enough (extent),
periodic at a singing-vibrato rate (autocorrelation peak) and concentrated
in the vibrato frequency band (periodogram share).
"""
import logging
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, field_validator, model_validator
from scipy.signal import correlate, periodogram

from pitchFunctions.errors import DegenerateContourError, EmptyCorpusError
from pitchFunctions.signal_io import F0Contour
from pitchFunctions.style_engine import decompose

logger = logging.getLogger(__name__)

Label = Literal["straight", "vibrato"]

CENTS_PER_LOG_UNIT = 1200.0 / np.log(2.0)


class DetectorConfig(BaseModel):
    extent_threshold_cents: float = 20.0
    rate_range_hz: Tuple[float, float] = (4.0, 9.0)
    band_hz: Tuple[float, float] = (5.0, 8.0)
    min_band_fraction: float = 0.5
    search_hz: Tuple[float, float] = (3.0, 10.0)
    min_window_seconds: float = 0.5

    @field_validator("rate_range_hz", "band_hz", "search_hz")
    @classmethod
    def _ordered(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0 < low < high:
            raise ValueError(f"range must satisfy 0 < low < high, got {value}")
        return value

    @model_validator(mode="after")
    def _check_scalars(self) -> "DetectorConfig":
        if self.extent_threshold_cents < 0:
            raise ValueError("extent_threshold_cents must be >= 0")
        if not 0 <= self.min_band_fraction <= 1:
            raise ValueError("min_band_fraction must lie in [0, 1]")
        if self.min_window_seconds <= 0:
            raise ValueError("min_window_seconds must be positive")
        return self


class VibratoEstimate(BaseModel):
    rate: float
    extent_cents: float
    band_energy_fraction: float
    label: Label

    @model_validator(mode="after")
    def _check_ranges(self) -> "VibratoEstimate":
        if self.rate < 0 or self.extent_cents < 0:
            raise ValueError("rate and extent must be >= 0")
        if not 0 <= self.band_energy_fraction <= 1:
            raise ValueError("band_energy_fraction must lie in [0, 1]")
        return self

    def to_record(self) -> dict:
        return self.model_dump()


def longest_voiced_run(voiced: np.ndarray) -> Tuple[int, int]:
    """(start, end_exclusive) of the longest run of voiced frames, (0, 0) if none"""
    padded = np.concatenate([[False], np.asarray(voiced, dtype=bool), [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    if len(edges) == 0:
        return 0, 0
    starts, ends = edges[0::2], edges[1::2]
    best = int(np.argmax(ends - starts))
    return int(starts[best]), int(ends[best])


def extent_cents(high: np.ndarray) -> float:
    """Peak deviation of a sinusoid with the same RMS, in cents"""
    return float(CENTS_PER_LOG_UNIT * np.sqrt(2.0) * np.sqrt(np.mean(np.square(high))))


def autocorrelation_rate(high: np.ndarray, frame_rate: float, search_hz: Tuple[float, float]) -> float:
    """
    Modulation rate from the first strong peak of the unbiased normalized
    autocorrelation within the lag range of search_hz. Returns 0 when the
    band is silent or no peak lies in range.
    """
    x = high - np.mean(high)
    n = len(x)
    acf = correlate(x, x, mode="full", method="direct")[n - 1:] / (n - np.arange(n))
    if acf[0] <= 0:
        return 0.0
    acf = acf / acf[0]

    min_lag = max(1, int(np.ceil(frame_rate / search_hz[1])))
    max_lag = min(n - 2, int(np.floor(frame_rate / search_hz[0])))
    if max_lag < min_lag:
        return 0.0
    lags = np.arange(min_lag, max_lag + 1)
    is_peak = (acf[lags] > acf[lags - 1]) & (acf[lags] >= acf[lags + 1])
    peak_lags = lags[is_peak]
    if len(peak_lags) == 0:
        return 0.0
    # harmonics of the period reach similar heights, so take the first strong one
    strongest = np.max(acf[peak_lags])
    lag = int(peak_lags[np.argmax(acf[peak_lags] >= 0.8 * strongest)])

    left, mid, right = acf[lag - 1], acf[lag], acf[lag + 1]
    curvature = left - 2.0 * mid + right
    offset = 0.5 * (left - right) / curvature if curvature < 0 else 0.0
    return float(frame_rate / (lag + offset))


def band_energy_fraction(high: np.ndarray, frame_rate: float, band_hz: Tuple[float, float]) -> float:
    """Share of the high band's Hann periodogram power inside band_hz"""
    freqs, power = periodogram(high, fs=frame_rate, window="hann", detrend="constant")
    total = float(np.sum(power))
    if total <= 0:
        return 0.0
    duration = len(high) / frame_rate
    guard = min(2.0 / duration, 1.0)
    inside = (freqs >= band_hz[0] - guard) & (freqs <= band_hz[1] + guard)
    return float(np.clip(np.sum(power[inside]) / total, 0.0, 1.0))


def estimate(
    contour: F0Contour,
    levels: int = 4,
    window: Optional[Tuple[int, int]] = None,
    config: DetectorConfig = DetectorConfig(),
) -> VibratoEstimate:
    """
    Estimate vibrato rate, extent and label on a voiced window.

    Args:
        contour: F0 contour
        levels: DWT level separating the high band
        window: (start, end_exclusive) frames; defaults to the longest voiced run
        config: detector thresholds

    Raises:
        DegenerateContourError: window shorter than min_window_seconds or not fully voiced
    """
    if window is None:
        start, end = longest_voiced_run(contour.voiced)
    else:
        start, end = int(window[0]), int(window[1])
        if not 0 <= start < end <= len(contour):
            raise DegenerateContourError(f"window {start}:{end} outside contour of {len(contour)} frames")
        if not np.all(contour.voiced[start:end]):
            raise DegenerateContourError(f"window {start}:{end} contains unvoiced frames")
    min_frames = int(np.ceil(config.min_window_seconds * contour.frame_rate))
    if end - start < min_frames:
        raise DegenerateContourError(
            f"voiced window of {end - start} frames is shorter than {config.min_window_seconds} s ({min_frames} frames)"
        )

    high = decompose(contour, levels).high[start:end]
    extent = extent_cents(high)
    rate = autocorrelation_rate(high, contour.frame_rate, config.search_hz)
    fraction = band_energy_fraction(high, contour.frame_rate, config.band_hz)
    is_vibrato = (
        extent >= config.extent_threshold_cents
        and config.rate_range_hz[0] <= rate <= config.rate_range_hz[1]
        and fraction >= config.min_band_fraction
    )
    return VibratoEstimate(
        rate=rate,
        extent_cents=extent,
        band_energy_fraction=fraction,
        label="vibrato" if is_vibrato else "straight",
    )


def level_energy_capture(contour: F0Contour, levels: int, modulation: np.ndarray) -> float:
    """
    Share of a known log-domain modulation's energy that lands in the high band.

    The high band h is projected onto the modulation m; the energy of that
    projection over the modulation energy is (<h, m> / ||m||^2)^2, with the
    coefficient clipped to [0, 1] before squaring.
    """
    modulation = np.asarray(modulation, dtype=np.float64)
    if len(modulation) != len(contour):
        raise DegenerateContourError(
            f"modulation has {len(modulation)} frames, contour has {len(contour)}"
        )
    energy = float(np.dot(modulation, modulation))
    if energy == 0:
        raise DegenerateContourError("modulation is identically zero")
    high = decompose(contour, levels).high
    coefficient = np.dot(high, modulation) / energy
    return float(np.clip(coefficient, 0.0, 1.0) ** 2)


def style_accuracy(
    corpus: Sequence[Tuple[F0Contour, str]],
    levels: int = 4,
    config: DetectorConfig = DetectorConfig(),
) -> float:
    """Fraction of (contour, label) pairs whose detected label matches"""
    if len(corpus) == 0:
        raise EmptyCorpusError("style accuracy needs at least one labelled contour")
    hits = 0
    for contour, label in corpus:
        if estimate(contour, levels, config=config).label == label:
            hits += 1
    accuracy = hits / len(corpus)
    logger.debug(f"Style accuracy {accuracy:.3f} over {len(corpus)} contours")
    return accuracy
