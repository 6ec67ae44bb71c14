"""
DIO-style F0 and voiced-flag extraction.

Each candidate band low-passes the signal with a Nuttall-window FIR whose
first spectral null sits at the band's centre frequency. Within a band that
passes only the fundamental, the filtered signal is close to a sinusoid, so
the four event intervals (rising/falling zero crossings, peaks, dips) agree.
Their coefficient of variation is the band's reliability score; the most
reliable valid band wins each frame.
"""
import logging
from typing import Tuple

import numpy as np
from pydantic import BaseModel, model_validator
from scipy.ndimage import uniform_filter1d
from scipy.signal import fftconvolve
from scipy.signal.windows import nuttall

from pitchFunctions.config import get_settings
from pitchFunctions.errors import DegenerateContourError
from pitchFunctions.signal_io import AudioBuffer, F0Contour

logger = logging.getLogger(__name__)


class TrackerConfig(BaseModel):
    f0_floor: float = 60.0
    f0_ceil: float = 1000.0
    hop: int = 256
    channels_per_octave: int = 2
    voicing_reliability_threshold: float = 0.15
    noise_floor: float = 1e-3

    @model_validator(mode="after")
    def _check_ranges(self) -> "TrackerConfig":
        if not 0 < self.f0_floor < self.f0_ceil:
            raise ValueError(f"need 0 < f0_floor < f0_ceil, got {self.f0_floor}, {self.f0_ceil}")
        if self.hop < 1:
            raise ValueError("hop must be at least 1")
        if self.channels_per_octave < 1:
            raise ValueError("channels_per_octave must be at least 1")
        if self.voicing_reliability_threshold <= 0:
            raise ValueError("voicing_reliability_threshold must be positive")
        return self

    @classmethod
    def from_settings(cls, **overrides) -> "TrackerConfig":
        return cls(**{"hop": get_settings().hop, **overrides})


def band_centers(config: TrackerConfig) -> np.ndarray:
    """Candidate band centre frequencies from f0_floor up to 2·f0_ceil"""
    count = int(np.ceil(np.log2(2.0 * config.f0_ceil / config.f0_floor) * config.channels_per_octave)) + 1
    return config.f0_floor * 2.0 ** (np.arange(count) / config.channels_per_octave)


def _lowpass(samples: np.ndarray, sample_rate: int, center: float) -> np.ndarray:
    length = max(3, int(round(4.0 * sample_rate / center)))
    if length % 2 == 0:
        length += 1
    taps = nuttall(length)
    taps /= taps.sum()
    return fftconvolve(samples, taps, mode="same")


def _zero_crossings(x: np.ndarray, rising: bool) -> np.ndarray:
    a, b = x[:-1], x[1:]
    if rising:
        idx = np.flatnonzero((a < 0) & (b >= 0))
    else:
        idx = np.flatnonzero((a > 0) & (b <= 0))
    a, b = x[idx], x[idx + 1]
    return idx + a / (a - b)


def _peaks(x: np.ndarray) -> np.ndarray:
    d = np.diff(x)
    idx = np.flatnonzero((d[:-1] > 0) & (d[1:] <= 0)) + 1
    left, mid, right = x[idx - 1], x[idx], x[idx + 1]
    curvature = left - 2.0 * mid + right
    offset = np.where(curvature != 0, 0.5 * (left - right) / np.where(curvature != 0, curvature, 1.0), 0.0)
    return idx + offset


def _event_frequency(locations: np.ndarray, sample_rate: int, frame_positions: np.ndarray) -> np.ndarray:
    """Interpolate 1/interval between consecutive events onto frame positions (NaN when too few events)"""
    if len(locations) < 3:
        return np.full(len(frame_positions), np.nan)
    intervals = np.diff(locations)
    centers = 0.5 * (locations[1:] + locations[:-1])
    return np.interp(frame_positions, centers, sample_rate / intervals)


def _band_candidates(filtered: np.ndarray, sample_rate: int, frame_positions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    estimates = np.stack([
        _event_frequency(_zero_crossings(filtered, rising=True), sample_rate, frame_positions),
        _event_frequency(_zero_crossings(filtered, rising=False), sample_rate, frame_positions),
        _event_frequency(_peaks(filtered), sample_rate, frame_positions),
        _event_frequency(_peaks(-filtered), sample_rate, frame_positions),
    ])
    mean = estimates.mean(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = estimates.std(axis=0) / mean
    return mean, score


def _frame_rms(samples: np.ndarray, window: int, frame_positions: np.ndarray) -> np.ndarray:
    power = uniform_filter1d(samples * samples, size=max(1, window), mode="constant")
    return np.sqrt(np.maximum(power[frame_positions], 0.0))


def extract_f0(buffer: AudioBuffer, config: TrackerConfig = TrackerConfig()) -> F0Contour:
    """
    Estimate the F0 contour and voiced flags of a mono buffer.

    Returns:
        F0Contour: floor(len(buffer) / hop) frames at sample_rate / hop

    Raises:
        DegenerateContourError: buffer shorter than two hops
        ValueError: f0_ceil not below the Nyquist frequency
    """
    sample_rate = buffer.sample_rate
    if config.f0_ceil >= sample_rate / 2:
        raise ValueError(f"f0_ceil {config.f0_ceil} must be below Nyquist ({sample_rate / 2})")
    samples = np.asarray(buffer.samples, dtype=np.float64)
    if len(samples) < 2 * config.hop:
        raise DegenerateContourError(
            f"buffer of {len(samples)} samples is shorter than two hops ({2 * config.hop})"
        )

    n_frames = len(samples) // config.hop
    frame_positions = np.arange(n_frames) * config.hop
    raw_rms = _frame_rms(samples, 2 * config.hop, frame_positions)

    best_f0 = np.zeros(n_frames)
    best_score = np.full(n_frames, np.inf)
    centers = [fc for fc in band_centers(config) if fc < sample_rate / 2]
    for center in centers:
        filtered = _lowpass(samples, sample_rate, center)
        band_rms = _frame_rms(filtered, 2 * config.hop, frame_positions)
        f0, score = _band_candidates(filtered, sample_rate, frame_positions)
        valid = (
            np.isfinite(score)
            & (f0 >= max(config.f0_floor, center / 4.0))
            & (f0 <= min(config.f0_ceil, center))
            & (band_rms > 1e-3 * np.maximum(raw_rms, 1e-12))
        )
        better = valid & (score < best_score)
        best_f0[better] = f0[better]
        best_score[better] = score[better]

    voiced = (best_score <= config.voicing_reliability_threshold) & (raw_rms >= config.noise_floor)
    logger.debug(
        f"Tracked {n_frames} frames over {len(centers)} bands, {int(voiced.sum())} voiced"
    )
    return F0Contour(np.where(voiced, best_f0, 0.0), voiced, sample_rate / config.hop)


def interpolate_unvoiced(contour: F0Contour) -> F0Contour:
    """
    Fill unvoiced frames by linear interpolation in log-Hz between flanking
    voiced frames, holding the nearest voiced value at either end.

    Voiced flags are carried through unchanged and the result is a filled
    contour. Applying it twice gives the same result.
    """
    f0 = np.where(contour.voiced, contour.f0_hz, np.exp(filled_log_f0(contour)))
    return F0Contour(f0, contour.voiced, contour.frame_rate, filled=True)


def filled_log_f0(contour: F0Contour) -> np.ndarray:
    """Natural-log F0 with unvoiced gaps filled"""
    voiced_idx = np.flatnonzero(contour.voiced)
    if len(voiced_idx) == 0:
        raise DegenerateContourError("cannot interpolate a contour with no voiced frames")
    log_f0 = np.log(contour.f0_hz[voiced_idx])
    filled = np.interp(np.arange(len(contour)), voiced_idx, log_f0)
    filled[voiced_idx] = log_f0
    return filled
