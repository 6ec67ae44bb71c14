import logging
from pathlib import Path
from typing import Union

import numpy as np
from scipy.ndimage import minimum_filter1d, uniform_filter1d

from pitchFunctions.pitch_tracker import interpolate_unvoiced
from pitchFunctions.signal_io import AudioBuffer, F0Contour, write_wav

logger = logging.getLogger(__name__)

DEMO_SAMPLE_RATE = 24000
FADE_SECONDS = 0.01
OUTPUT_GAIN = 0.25


def render_contour(contour: F0Contour, partials: int = 8, sample_rate: int = DEMO_SAMPLE_RATE) -> AudioBuffer:
    """
    Additive harmonic rendering of a contour.

    Partial k has amplitude 1/k; partials at or above Nyquist are dropped.
    The phase is integrated sample by sample, so pitch changes never click.
    Unvoiced frames are exactly silent; voiced runs fade in and out over
    their own first and last 10 ms.
    """
    if partials < 1:
        raise ValueError(f"partials must be at least 1, got {partials}")
    n_samples = int(round(len(contour) * sample_rate / contour.frame_rate))
    if contour.voiced_count == 0:
        return AudioBuffer(np.zeros(n_samples), sample_rate)

    sample_times = np.arange(n_samples) / sample_rate
    filled = interpolate_unvoiced(contour)
    f0 = np.interp(sample_times, contour.times, filled.f0_hz)
    frame_index = np.minimum((sample_times * contour.frame_rate).astype(int), len(contour) - 1)
    gate = contour.voiced[frame_index].astype(np.float64)
    fade = max(1, int(round(FADE_SECONDS * sample_rate)))
    # erode first so both fades sit inside the voiced run
    core = minimum_filter1d(gate, size=fade + 1, mode="constant", cval=0.0)
    envelope = uniform_filter1d(core, size=fade, mode="constant") * gate

    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate
    signal = np.zeros(n_samples)
    for k in range(1, partials + 1):
        audible = k * f0 < sample_rate / 2
        signal += np.where(audible, np.sin(k * phase) / k, 0.0)
    return AudioBuffer(OUTPUT_GAIN * envelope * signal, sample_rate)


def synth_demo(contour: F0Contour, out_wav: Union[str, Path], partials: int = 8) -> AudioBuffer:
    """Render a contour and write it as a 24 kHz 16-bit WAV"""
    buffer = render_contour(contour, partials)
    write_wav(out_wav, buffer)
    logger.info(f"Rendered {len(contour)} frames ({buffer.duration:.2f} s) to {out_wav}")
    return buffer
