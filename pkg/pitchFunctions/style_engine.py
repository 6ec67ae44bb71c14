"""
Pitch style operations on F0 contours.

All style work happens on the natural-log contour. decompose() splits it
with the Haar DWT into a low band (melody) and a high band (vibrato and
other fast movement); recompose() scales the high band and adds it back.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, field_validator

from pitchFunctions.errors import DegenerateContourError, ScalingError
from pitchFunctions.pitch_tracker import filled_log_f0
from pitchFunctions.signal_io import F0Contour, read_contour
from pitchFunctions.wavelet import dwt, reconstruct_band

logger = logging.getLogger(__name__)

CENTS_PER_OCTAVE = 1200.0


@dataclass(frozen=True, eq=False)
class StyleBands:
    low: np.ndarray
    high: np.ndarray
    voiced: np.ndarray
    frame_rate: float
    levels: int

    def __post_init__(self):
        if not (len(self.low) == len(self.high) == len(self.voiced)):
            raise ScalingError(
                f"band lengths differ: low {len(self.low)}, high {len(self.high)}, voiced {len(self.voiced)}"
            )

    def __len__(self) -> int:
        return len(self.low)

    def with_high(self, high) -> "StyleBands":
        """Same low band and flags with a replacement high band"""
        return StyleBands(self.low, np.asarray(high, dtype=np.float64), self.voiced, self.frame_rate, self.levels)


class ScalingSpec(BaseModel):
    """
    Vibrato scaling factors. frame_factors, when given, holds one entry per
    frame; None entries fall back to global_factor.
    """

    global_factor: float = 1.0
    frame_factors: Optional[List[Optional[float]]] = None

    @field_validator("global_factor")
    @classmethod
    def _check_global(cls, value: float) -> float:
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"scaling factor must be finite and >= 0, got {value}")
        return value

    @field_validator("frame_factors")
    @classmethod
    def _check_frames(cls, values):
        if values is None:
            return values
        for index, value in enumerate(values):
            if value is not None and (not np.isfinite(value) or value < 0):
                raise ValueError(f"frame {index}: scaling factor must be finite and >= 0, got {value}")
        return values

    @classmethod
    def from_ranges(cls, global_factor: float, ranges: Iterable[Tuple[int, int, float]], length: int) -> "ScalingSpec":
        """Build a frame-level spec from (start, end_exclusive, factor) ranges"""
        frames: List[Optional[float]] = [None] * length
        for start, end, factor in ranges:
            if not 0 <= start < end <= length:
                raise ScalingError(f"frame range {start}:{end} outside contour of {length} frames")
            frames[start:end] = [factor] * (end - start)
        return cls(global_factor=global_factor, frame_factors=frames)

    def factors(self, length: int) -> np.ndarray:
        """Per-frame α for a contour of the given length"""
        if self.frame_factors is None:
            return np.full(length, self.global_factor)
        if len(self.frame_factors) != length:
            raise ScalingError(f"frame_factors has {len(self.frame_factors)} entries for {length} frames")
        return np.array(
            [self.global_factor if f is None else f for f in self.frame_factors], dtype=np.float64
        )


class VibratoParams(BaseModel):
    rate: float
    extent: float
    onset_delay: float = 0.0
    phase: float = 0.0

    @field_validator("rate")
    @classmethod
    def _check_rate(cls, value: float) -> float:
        if not np.isfinite(value) or value <= 0:
            raise ValueError(f"rate must be positive, got {value}")
        return value

    @field_validator("extent", "onset_delay")
    @classmethod
    def _check_nonnegative(cls, value: float) -> float:
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"must be finite and >= 0, got {value}")
        return value

    @field_validator("phase")
    @classmethod
    def _check_phase(cls, value: float) -> float:
        if not np.isfinite(value):
            raise ValueError("phase must be finite")
        return value


def decompose(contour: F0Contour, levels: int = 4) -> StyleBands:
    """
    Split a contour into low and high log-F0 bands.

    Unvoiced gaps are filled in log-Hz first, so both bands are defined on
    every frame; the voiced flags travel alongside unchanged.

    Raises:
        DegenerateContourError: fewer than 2**levels frames or no voiced frame
    """
    if len(contour) < 2 ** levels:
        raise DegenerateContourError(
            f"contour of {len(contour)} frames is too short for level {levels} (need {2 ** levels})"
        )
    log_f0 = filled_log_f0(contour)
    decomposition = dwt(log_f0, levels)
    low = reconstruct_band(decomposition, "low")
    high = reconstruct_band(decomposition, "high")
    return StyleBands(low, high, contour.voiced.copy(), contour.frame_rate, levels)


def recompose(bands: StyleBands, spec: ScalingSpec = ScalingSpec()) -> F0Contour:
    """f0 = exp(low + α·high) on voiced frames, 0 elsewhere"""
    alpha = spec.factors(len(bands))
    f0 = np.exp(bands.low + alpha * bands.high)
    return F0Contour(np.where(bands.voiced, f0, 0.0), bands.voiced, bands.frame_rate)


def remove_vibrato(contour: F0Contour, levels: int = 4) -> F0Contour:
    return recompose(decompose(contour, levels), ScalingSpec(global_factor=0.0))


def shift_pitch_range(contour: F0Contour, src_mean: float, tgt_mean: float) -> F0Contour:
    """Move a contour into another singer's range by the ratio of mean F0 values"""
    if not (src_mean > 0 and tgt_mean > 0):
        raise ScalingError(f"mean F0 values must be positive, got {src_mean} and {tgt_mean}")
    ratio = tgt_mean / src_mean
    return F0Contour(contour.f0_hz * ratio, contour.voiced, contour.frame_rate, filled=contour.filled)


def mean_f0(contour: F0Contour) -> float:
    if contour.voiced_count == 0:
        raise DegenerateContourError("mean F0 is undefined for a contour with no voiced frames")
    return float(np.mean(contour.f0_hz[contour.voiced]))


def mean_f0_table(paths: Iterable[Union[str, Path]]) -> Dict[str, float]:
    """Voiced mean F0 of every contour file, keyed by file stem"""
    table = {}
    for path in paths:
        path = Path(path)
        table[path.stem] = mean_f0(read_contour(path))
        logger.debug(f"{path.stem}: mean F0 {table[path.stem]:.2f} Hz")
    return table


def vibrato_modulation(length: int, frame_rate: float, params: VibratoParams) -> np.ndarray:
    """
    Log-domain vibrato: (extent/1200)·ln 2·ramp(t)·sin(2π·rate·t + phase),
    with t = 0 at the first frame and a linear ramp over onset_delay.
    """
    t = np.arange(length) / frame_rate
    if params.onset_delay > 0:
        ramp = np.clip(t / params.onset_delay, 0.0, 1.0)
    else:
        ramp = np.ones(length)
    depth = params.extent / CENTS_PER_OCTAVE * np.log(2.0)
    return depth * ramp * np.sin(2.0 * np.pi * params.rate * t + params.phase)


def _resolve_segment(contour: F0Contour, segment: Optional[Tuple[int, int]]) -> Tuple[int, int]:
    if segment is None:
        return 0, len(contour)
    start, end = int(segment[0]), int(segment[1])
    if not 0 <= start < end <= len(contour):
        raise DegenerateContourError(f"segment {start}:{end} outside contour of {len(contour)} frames")
    return start, end


def synth_vibrato(
    contour: F0Contour,
    params: VibratoParams,
    segment: Optional[Tuple[int, int]] = None,
) -> F0Contour:
    """
    Add sinusoidal log-domain vibrato to the frames start:end (end exclusive).

    Raises:
        DegenerateContourError: segment out of range or containing unvoiced frames
    """
    start, end = _resolve_segment(contour, segment)
    if not np.all(contour.voiced[start:end]):
        raise DegenerateContourError(f"segment {start}:{end} contains unvoiced frames")
    f0 = contour.f0_hz.copy()
    f0[start:end] *= np.exp(vibrato_modulation(end - start, contour.frame_rate, params))
    return F0Contour(f0, contour.voiced, contour.frame_rate, filled=contour.filled)
