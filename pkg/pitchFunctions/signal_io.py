"""
Audio and contour file IO.

WAV files are parsed chunk by chunk (RIFF little-endian only) so each way a
file can be wrong gets its own diagnostic. Contours are stored as JSON
{frame_rate, frames:[{f0, voiced}]} or CSV (index,f0,voiced) with the frame
rate in a leading comment line.
"""
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from pitchFunctions.errors import (
    ContourSchemaError,
    TruncatedWavError,
    UnsupportedWavError,
    WavFormatError,
    WavHeaderError,
)

logger = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

PathLike = Union[str, Path]


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono samples in [-1, 1] plus their sample rate"""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = _frozen_array(self.samples, np.float64).reshape(-1)
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True, eq=False)
class F0Contour:
    """
    Frame-rate F0 values with per-frame voiced flags.

    Unvoiced frames carry f0 = 0 and voiced frames a positive f0, except on a
    filled contour (see pitch_tracker.interpolate_unvoiced) where every frame
    holds a positive f0 and the flags only record where voicing was detected.
    """

    f0_hz: np.ndarray
    voiced: np.ndarray
    frame_rate: float
    filled: bool = False

    def __post_init__(self):
        f0 = _frozen_array(self.f0_hz, np.float64).reshape(-1)
        voiced = _frozen_array(self.voiced, bool).reshape(-1)
        if len(f0) != len(voiced):
            raise ContourSchemaError(f"f0 has {len(f0)} frames but voiced has {len(voiced)}")
        if not (np.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise ContourSchemaError(f"frame_rate must be positive, got {self.frame_rate}")
        if not np.all(np.isfinite(f0)):
            raise ContourSchemaError("f0 values must be finite")
        if self.filled:
            if np.any(f0 <= 0.0):
                raise ContourSchemaError("filled contours must carry f0 > 0 on every frame")
        else:
            if np.any(f0[~voiced] != 0.0):
                raise ContourSchemaError("unvoiced frames must carry f0 = 0")
            if np.any(f0[voiced] <= 0.0):
                raise ContourSchemaError("voiced frames must carry f0 > 0")
        object.__setattr__(self, "f0_hz", f0)
        object.__setattr__(self, "voiced", voiced)
        object.__setattr__(self, "frame_rate", float(self.frame_rate))

    def __len__(self) -> int:
        return len(self.f0_hz)

    @classmethod
    def from_hz(cls, f0_hz, frame_rate: float, voiced=None) -> "F0Contour":
        """Build a contour from Hz values, treating non-positive/NaN values as unvoiced"""
        f0 = np.asarray(f0_hz, dtype=np.float64)
        if voiced is None:
            voiced = np.isfinite(f0) & (f0 > 0)
        voiced = np.asarray(voiced, dtype=bool)
        return cls(np.where(voiced, f0, 0.0), voiced, frame_rate)

    def masked(self) -> "F0Contour":
        """The same contour with unvoiced frames reset to f0 = 0"""
        if not self.filled:
            return self
        return F0Contour(np.where(self.voiced, self.f0_hz, 0.0), self.voiced, self.frame_rate)

    @property
    def voiced_count(self) -> int:
        return int(np.count_nonzero(self.voiced))

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.frame_rate


# ---------------------------------------------------------------------------
# WAV
# ---------------------------------------------------------------------------

def _iter_chunks(data: bytes):
    """Yield (chunk_id, payload_offset, declared_size) for every RIFF sub-chunk"""
    offset = 12
    while offset + 8 <= len(data):
        chunk_id, size = struct.unpack_from('<4sI', data, offset)
        yield chunk_id, offset + 8, size
        offset += 8 + size + (size & 1)


def read_wav(path: PathLike) -> AudioBuffer:
    """
    Read a PCM16 or float32 RIFF/WAVE file, downmixing stereo by averaging.

    Raises:
        WavHeaderError: missing/malformed RIFF, WAVE or fmt data
        UnsupportedWavError: RIFX/RF64, other codecs or bit depths, >2 channels
        TruncatedWavError: data chunk shorter than declared
    """
    with open(path, 'rb') as f:
        data = f.read()

    if len(data) < 12:
        raise WavHeaderError(f"{path}: file too short for a RIFF header ({len(data)} bytes)")
    magic, _, form = struct.unpack_from('<4sI4s', data, 0)
    if magic in (b'RIFX', b'RF64', b'FFIR'):
        raise UnsupportedWavError(f"{path}: {magic.decode('ascii', 'replace')} files are not supported")
    if magic != b'RIFF':
        raise WavHeaderError(f"{path}: missing RIFF magic (found {magic!r})")
    if form != b'WAVE':
        raise WavHeaderError(f"{path}: RIFF form type is {form!r}, expected b'WAVE'")

    fmt = None
    payload = None
    for chunk_id, start, size in _iter_chunks(data):
        if chunk_id == b'fmt ':
            if size < 16 or start + size > len(data):
                raise WavHeaderError(f"{path}: fmt chunk is {size} bytes, expected at least 16")
            fmt = struct.unpack_from('<HHIIHH', data, start)
            format_tag = fmt[0]
            if format_tag == WAVE_FORMAT_EXTENSIBLE:
                if size < 40:
                    raise WavHeaderError(f"{path}: extensible fmt chunk is {size} bytes, expected 40")
                sub_format, = struct.unpack_from('<H', data, start + 24)
                fmt = (sub_format,) + fmt[1:]
        elif chunk_id == b'data':
            if fmt is None:
                raise WavHeaderError(f"{path}: data chunk precedes fmt chunk")
            available = len(data) - start
            if size > available:
                raise TruncatedWavError(
                    f"{path}: data chunk declares {size} bytes but only {available} are present"
                )
            payload = data[start:start + size]
            break

    if fmt is None:
        raise WavHeaderError(f"{path}: no fmt chunk found")
    if payload is None:
        raise WavHeaderError(f"{path}: no data chunk found")

    format_tag, channels, sample_rate, _, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedWavError(f"{path}: {channels} channels (only mono or stereo)")
    if sample_rate <= 0:
        raise WavHeaderError(f"{path}: sample rate is {sample_rate}")

    if format_tag == WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype('<i2'), 1.0 / 32768.0
    elif format_tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype('<f4'), 1.0
    else:
        raise UnsupportedWavError(f"{path}: format tag {format_tag:#06x} with {bits} bits per sample")

    frame_bytes = dtype.itemsize * channels
    if len(payload) % frame_bytes:
        raise TruncatedWavError(
            f"{path}: data chunk of {len(payload)} bytes is not a whole number of {frame_bytes}-byte frames"
        )

    samples = np.frombuffer(payload, dtype=dtype).astype(np.float64) * scale
    samples = samples.reshape(-1, channels).mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise WavFormatError(f"{path}: float data contains NaN or infinity")
    if dtype.kind == 'f' and np.any(np.abs(samples) > 1.0):
        logger.warning(f"{path}: clamping float samples outside [-1, 1]")
        samples = np.clip(samples, -1.0, 1.0)

    logger.debug(f"Read {len(samples)} samples at {sample_rate} Hz from {path}")
    return AudioBuffer(samples, sample_rate)


def write_wav(path: PathLike, buffer: AudioBuffer) -> None:
    """Write a buffer as 16-bit PCM mono; samples outside [-1, 1] are clamped"""
    samples = np.asarray(buffer.samples, dtype=np.float64)
    if np.any(np.abs(samples) > 1.0):
        logger.warning(f"{path}: clamping {int(np.count_nonzero(np.abs(samples) > 1.0))} samples")
    quantized = np.clip(np.round(np.clip(samples, -1.0, 1.0) * 32768.0), -32768, 32767).astype('<i2')
    payload = quantized.tobytes()

    header = struct.pack(
        '<4sI4s4sIHHIIHH4sI',
        b'RIFF', 36 + len(payload), b'WAVE',
        b'fmt ', 16, WAVE_FORMAT_PCM, 1, buffer.sample_rate, buffer.sample_rate * 2, 2, 16,
        b'data', len(payload),
    )
    with open(path, 'wb') as f:
        f.write(header)
        f.write(payload)
        if len(payload) & 1:
            f.write(b'\x00')
    logger.debug(f"Wrote {len(quantized)} samples to {path}")


# ---------------------------------------------------------------------------
# Contours
# ---------------------------------------------------------------------------

class ContourFrame(BaseModel):
    f0: float
    voiced: bool


class ContourFile(BaseModel):
    """On-disk contour schema shared by the JSON files and the HTTP service"""

    frame_rate: float
    frames: List[ContourFrame]

    @field_validator("frame_rate")
    @classmethod
    def _positive_rate(cls, value: float) -> float:
        if not (np.isfinite(value) and value > 0):
            raise ValueError("frame_rate must be positive")
        return value

    @model_validator(mode="after")
    def _consistent_frames(self) -> "ContourFile":
        for index, frame in enumerate(self.frames):
            if not np.isfinite(frame.f0):
                raise ValueError(f"frame {index}: f0 is not finite")
            if frame.voiced and frame.f0 <= 0:
                raise ValueError(f"frame {index}: voiced frame with f0 {frame.f0}")
            if not frame.voiced and frame.f0 != 0:
                raise ValueError(f"frame {index}: unvoiced frame with f0 {frame.f0}")
        return self

    @classmethod
    def from_contour(cls, contour: F0Contour) -> "ContourFile":
        contour = contour.masked()
        return cls(
            frame_rate=contour.frame_rate,
            frames=[ContourFrame(f0=float(f), voiced=bool(v)) for f, v in zip(contour.f0_hz, contour.voiced)],
        )

    def to_contour(self) -> F0Contour:
        return F0Contour(
            np.array([frame.f0 for frame in self.frames], dtype=np.float64),
            np.array([frame.voiced for frame in self.frames], dtype=bool),
            self.frame_rate,
        )


def _format_for(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        return fmt.lower()
    return "csv" if path.suffix.lower() == ".csv" else "json"


def write_contour(path: PathLike, contour: F0Contour, fmt: Optional[Literal["json", "csv"]] = None) -> None:
    """Write a contour as JSON or CSV (format inferred from the suffix when omitted)"""
    path = Path(path)
    fmt = _format_for(path, fmt)
    contour = contour.masked()
    if fmt == "json":
        document = ContourFile.from_contour(contour).model_dump()
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(document, f)
            f.write('\n')
    elif fmt == "csv":
        df = pd.DataFrame({
            "index": np.arange(len(contour)),
            "f0": contour.f0_hz,
            "voiced": contour.voiced.astype(int),
        })
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(f"# frame_rate={contour.frame_rate!r}\n")
            df.to_csv(f, index=False, lineterminator='\n', float_format=None)
    else:
        raise ValueError(f"Unsupported contour format: {fmt}")
    logger.debug(f"Wrote {len(contour)} frames to {path}")


def _read_contour_csv(path: Path) -> F0Contour:
    with open(path, 'r', encoding='utf-8') as f:
        first = f.readline().strip()
        if not first.startswith("# frame_rate="):
            raise ContourSchemaError(f"{path}: missing '# frame_rate=' header line")
        try:
            frame_rate = float(first.split("=", 1)[1])
        except ValueError as e:
            raise ContourSchemaError(f"{path}: unreadable frame rate in header {first!r}") from e
        try:
            df = pd.read_csv(f, dtype=str, keep_default_na=False)
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            raise ContourSchemaError(f"{path}: unreadable CSV body: {e}") from e

    missing = {"index", "f0", "voiced"} - set(df.columns)
    if missing:
        raise ContourSchemaError(f"{path}: missing columns {sorted(missing)}")

    f0 = pd.to_numeric(df["f0"], errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(f0)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ContourSchemaError(f"{path}: row {row}: f0 value {df['f0'].iloc[row]!r} is not a number")

    flags = df["voiced"].str.strip().str.lower()
    known = flags.isin(["0", "1", "true", "false"])
    if not known.all():
        row = int(np.flatnonzero(~known.to_numpy())[0])
        raise ContourSchemaError(f"{path}: row {row}: voiced value {df['voiced'].iloc[row]!r} is not 0/1")
    voiced = flags.isin(["1", "true"]).to_numpy()

    try:
        return F0Contour(f0, voiced, frame_rate)
    except ContourSchemaError as e:
        raise ContourSchemaError(f"{path}: {e}") from e


def read_contour(path: PathLike) -> F0Contour:
    """
    Read a contour written by write_contour.

    Raises:
        ContourSchemaError: when the file violates the JSON or CSV schema
    """
    path = Path(path)
    if _format_for(path, None) == "csv":
        return _read_contour_csv(path)
    with open(path, 'r', encoding='utf-8') as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ContourSchemaError(f"{path}: invalid JSON: {e}") from e
    try:
        return ContourFile.model_validate(document).to_contour()
    except ValidationError as e:
        raise ContourSchemaError(f"{path}: {e}") from e
