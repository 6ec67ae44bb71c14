from typing import List, Tuple

import numpy as np

from pitchFunctions.signal_io import F0Contour
from pitchFunctions.style_engine import VibratoParams, synth_vibrato

MAX_ONSET_DELAY = 0.2


def create_random_vibrato(
    rng: np.random.Generator,
    rate: float,
    extent: float,
    start: int,
    frame_rate: float,
    phase_locked: bool = False,
) -> VibratoParams:
    """Vibrato parameters for one note starting at frame ``start``"""
    onset_delay = float(rng.uniform(0.0, MAX_ONSET_DELAY))
    if phase_locked:
        phase = float(np.mod(2.0 * np.pi * rate * start / frame_rate, 2.0 * np.pi))
    else:
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
    return VibratoParams(rate=rate, extent=extent, onset_delay=onset_delay, phase=phase)


def add_note_vibrato(
    rng: np.random.Generator,
    contour: F0Contour,
    plateaus: List[Tuple[int, int]],
    rate: float,
    extent: float,
    phase_locked: bool = False,
) -> F0Contour:
    """Apply vibrato with a fresh onset (and phase, unless locked) to every note plateau"""
    for start, end in plateaus:
        params = create_random_vibrato(rng, rate, extent, start, contour.frame_rate, phase_locked)
        contour = synth_vibrato(contour, params, (start, end))
    return contour
