from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

GLIDE_SECONDS = 0.1
PLATEAU_MARGIN = 5
SEMITONE_STEPS = np.array([-2, -1, 1, 2])


@dataclass(frozen=True, eq=False)
class Melody:
    """Log-Hz note melody before vibrato and jitter"""

    log_f0: np.ndarray
    voiced: np.ndarray
    plateaus: List[Tuple[int, int]]


def create_random_melody(
    rng: np.random.Generator,
    base_pitch_range: Tuple[float, float],
    note_count_range: Tuple[int, int],
    frame_rate: float,
    grid: int,
) -> Melody:
    """
    Create a random stepwise melody with glides between notes.

    Note boundaries fall on multiples of ``grid`` frames and one grid cell of
    unvoiced frames pads each end. Each note lasts 8 to 16 grid cells and
    moves one or two semitones from the previous one.
    """
    note_count = int(rng.integers(note_count_range[0], note_count_range[1] + 1))
    cells = rng.integers(8, 17, size=note_count)
    base = np.exp(rng.uniform(np.log(base_pitch_range[0]), np.log(base_pitch_range[1])))
    semitones = np.concatenate([[0], np.cumsum(rng.choice(SEMITONE_STEPS, size=note_count - 1))])
    levels = np.log(base) + semitones * np.log(2.0) / 12.0

    boundaries = grid + grid * np.concatenate([[0], np.cumsum(cells)])
    total = int(boundaries[-1]) + grid
    half_glide = GLIDE_SECONDS * frame_rate / 2.0

    knots_x, knots_y = [], []
    for k in range(note_count):
        start = boundaries[k] + (half_glide if k > 0 else 0.0)
        end = boundaries[k + 1] - (half_glide if k < note_count - 1 else 1.0)
        knots_x.extend([start, end])
        knots_y.extend([levels[k], levels[k]])

    frames = np.arange(total)
    voiced = (frames >= boundaries[0]) & (frames < boundaries[-1])
    log_f0 = np.where(voiced, np.interp(frames, knots_x, knots_y), 0.0)
    plateaus = [
        (int(boundaries[k]) + PLATEAU_MARGIN, int(boundaries[k + 1]) - PLATEAU_MARGIN)
        for k in range(note_count)
    ]
    return Melody(log_f0, voiced, plateaus)
