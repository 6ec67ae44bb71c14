"""
Multilevel orthonormal Haar (db1) transform, one pywt stage per level.

Details are stored finest first: details[0] is D_1, details[-1] is D_L.
Stages with an odd input length are padded by repeating the last sample;
the padding is recorded so synthesis can truncate back exactly.
"""
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pywt

from pitchFunctions.errors import DecompositionError, WaveletLevelError

WAVELET = "haar"
# stages always see an even length, so periodization adds no boundary samples
MODE = "periodization"

Band = Literal["low", "high"]


@dataclass(frozen=True, eq=False)
class WaveletDecomposition:
    levels: int
    approx: np.ndarray
    details: Tuple[np.ndarray, ...]
    original_length: Optional[int] = None
    padding: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        approx = np.asarray(self.approx, dtype=np.float64)
        details = tuple(np.asarray(d, dtype=np.float64) for d in self.details)
        padding = tuple(int(p) for p in self.padding) if self.padding is not None else (0,) * len(details)
        original_length = self.original_length
        if original_length is None:
            original_length = len(approx) * 2 ** len(details) - _padding_excess(padding)
        object.__setattr__(self, "approx", approx)
        object.__setattr__(self, "details", details)
        object.__setattr__(self, "padding", padding)
        object.__setattr__(self, "original_length", int(original_length))

    def stage_lengths(self) -> List[int]:
        """Input length of every analysis stage, followed by the approximation length"""
        lengths = [self.original_length]
        for pad in self.padding:
            lengths.append((lengths[-1] + pad) // 2)
        return lengths


def _padding_excess(padding: Sequence[int]) -> int:
    # each pad sample added at stage j stands for 2^j input samples
    return sum(pad * 2 ** j for j, pad in enumerate(padding))


def _analysis_stage(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    pad = len(x) % 2
    if pad:
        x = np.append(x, x[-1])
    approx, detail = pywt.dwt(x, WAVELET, mode=MODE)
    return approx, detail, pad


def _synthesis_stage(approx: np.ndarray, detail: np.ndarray, length: int) -> np.ndarray:
    return pywt.idwt(approx, detail, WAVELET, mode=MODE)[:length]


def dwt(x, levels: int = 4) -> WaveletDecomposition:
    """
    Haar analysis to the requested depth.

    Args:
        x: 1-D real sequence of at least 2**levels samples
        levels: number of halvings L (>= 1)

    Returns:
        WaveletDecomposition: A_L, D_1..D_L and padding bookkeeping

    Raises:
        WaveletLevelError: levels < 1 or the sequence is too short for them
        DecompositionError: non-finite input
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DecompositionError(f"expected a 1-D sequence, got shape {x.shape}")
    if levels < 1:
        raise WaveletLevelError(f"levels must be at least 1, got {levels}")
    if len(x) < 2 ** levels:
        raise WaveletLevelError(f"{len(x)} samples cannot be decomposed to level {levels} (need {2 ** levels})")
    if not np.all(np.isfinite(x)):
        raise DecompositionError("input contains non-finite values")

    approx = x
    details, padding = [], []
    for _ in range(levels):
        approx, detail, pad = _analysis_stage(approx)
        details.append(detail)
        padding.append(pad)
    return WaveletDecomposition(levels, approx, tuple(details), len(x), tuple(padding))


def idwt(decomposition: WaveletDecomposition) -> np.ndarray:
    """Exact inverse of dwt, truncated to the original length"""
    lengths = decomposition.stage_lengths()
    if len(decomposition.details) != decomposition.levels or len(decomposition.padding) != decomposition.levels:
        raise DecompositionError(
            f"expected {decomposition.levels} detail levels, got {len(decomposition.details)}"
        )
    if len(decomposition.approx) != lengths[-1]:
        raise DecompositionError(
            f"approximation has {len(decomposition.approx)} coefficients, expected {lengths[-1]}"
        )
    for j, detail in enumerate(decomposition.details):
        if len(detail) != lengths[j + 1]:
            raise DecompositionError(
                f"detail level {j + 1} has {len(detail)} coefficients, expected {lengths[j + 1]}"
            )

    x = decomposition.approx
    for j in reversed(range(decomposition.levels)):
        x = _synthesis_stage(x, decomposition.details[j], lengths[j])
    return x


def reconstruct_band(decomposition: WaveletDecomposition, band: Band) -> np.ndarray:
    """
    Synthesize one band: "low" from the approximation alone, "high" from the
    details alone. The two bands sum to idwt(decomposition).
    """
    if band == "low":
        zeroed = WaveletDecomposition(
            decomposition.levels,
            decomposition.approx,
            tuple(np.zeros_like(d) for d in decomposition.details),
            decomposition.original_length,
            decomposition.padding,
        )
    elif band == "high":
        zeroed = WaveletDecomposition(
            decomposition.levels,
            np.zeros_like(decomposition.approx),
            decomposition.details,
            decomposition.original_length,
            decomposition.padding,
        )
    else:
        raise ValueError(f"band must be 'low' or 'high', got {band!r}")
    return idwt(zeroed)


def band_edges(frame_rate: float, levels: int) -> Tuple[Tuple[float, float], List[Tuple[float, float]]]:
    """
    Nominal frequency ranges of the approximation and of each detail level.

    Returns:
        ((0, fr/2^(L+1)), [(fr/2^(j+1), fr/2^j) for j = 1..L])
    """
    approx_band = (0.0, frame_rate / 2 ** (levels + 1))
    detail_bands = [(frame_rate / 2 ** (j + 1), frame_rate / 2 ** j) for j in range(1, levels + 1)]
    return approx_band, detail_bands


def band_energies(decomposition: WaveletDecomposition) -> Dict[str, float]:
    """Sum of squared coefficients per band, keyed "approx", "detail_1" .. "detail_L" """
    energies = {"approx": float(np.sum(decomposition.approx ** 2))}
    for j, detail in enumerate(decomposition.details, start=1):
        energies[f"detail_{j}"] = float(np.sum(detail ** 2))
    return energies
