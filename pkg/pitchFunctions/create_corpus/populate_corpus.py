"""
Synthetic labelled contour corpus.

Every item is a stepwise note melody framed at the analysis frame rate,
optionally carrying per-note vibrato, plus white log-domain jitter. Items
are seeded individually from (seed, index), so building them in parallel
gives the same corpus as building them in order.
"""
import concurrent.futures
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator

from pitchFunctions.create_corpus.create_random_melody import create_random_melody
from pitchFunctions.create_corpus.create_random_vibrato import add_note_vibrato
from pitchFunctions.errors import ContourSchemaError
from pitchFunctions.json_utils import save_to_json
from pitchFunctions.signal_io import F0Contour, read_contour, write_contour

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
CONTOUR_DIR = "contours"


class CorpusSpec(BaseModel):
    items: int = 200
    base_pitch_range: Tuple[float, float] = (110.0, 440.0)
    note_count_range: Tuple[int, int] = (3, 6)
    vibrato_fraction: float = 0.5
    rate_range: Tuple[float, float] = (5.0, 8.0)
    extent_range: Tuple[float, float] = (30.0, 120.0)
    jitter_cents_rms: float = 3.0
    seed: int = 0
    frame_rate: float = 24000 / 256
    levels: int = 4
    phase_locked: bool = False
    # also build each item in the opposite style as CorpusItem.twin
    paired: bool = False

    @field_validator("base_pitch_range", "rate_range", "extent_range", "note_count_range")
    @classmethod
    def _ordered(cls, value):
        low, high = value
        if low > high:
            raise ValueError(f"range must be ordered, got {value}")
        return value

    @field_validator("base_pitch_range", "rate_range")
    @classmethod
    def _positive(cls, value):
        if value[0] <= 0:
            raise ValueError(f"range must be positive, got {value}")
        return value

    @field_validator("extent_range")
    @classmethod
    def _nonnegative(cls, value):
        if value[0] < 0:
            raise ValueError(f"extent range must be >= 0, got {value}")
        return value

    @field_validator("note_count_range")
    @classmethod
    def _at_least_one_note(cls, value):
        if value[0] < 1:
            raise ValueError("items need at least one note")
        return value

    @field_validator("vibrato_fraction")
    @classmethod
    def _fraction(cls, value: float) -> float:
        if not 0 <= value <= 1:
            raise ValueError(f"vibrato_fraction must lie in [0, 1], got {value}")
        return value

    @field_validator("items", "levels")
    @classmethod
    def _positive_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("jitter_cents_rms", "seed")
    @classmethod
    def _nonnegative_scalar(cls, value):
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"must be finite and >= 0, got {value}")
        return value

    @field_validator("frame_rate")
    @classmethod
    def _positive_rate(cls, value: float) -> float:
        if not np.isfinite(value) or value <= 0:
            raise ValueError(f"frame_rate must be positive, got {value}")
        return value


@dataclass(frozen=True, eq=False)
class CorpusItem:
    id: str
    contour: F0Contour
    label: str
    rate: Optional[float]
    extent_cents: Optional[float]
    twin: Optional[F0Contour] = None


class ManifestItem(BaseModel):
    id: str
    path: str
    label: str
    rate: Optional[float]
    extent_cents: Optional[float]

    @field_validator("label")
    @classmethod
    def _known_label(cls, value: str) -> str:
        if value not in ("straight", "vibrato"):
            raise ValueError(f"unknown label {value!r}")
        return value


class Manifest(BaseModel):
    spec: CorpusSpec
    items: List[ManifestItem]


def vibrato_assignment(spec: CorpusSpec) -> np.ndarray:
    """Boolean per item; exactly round(items · vibrato_fraction) are True"""
    count = int(round(spec.items * spec.vibrato_fraction))
    order = np.random.default_rng(spec.seed).permutation(spec.items)
    flags = np.zeros(spec.items, dtype=bool)
    flags[order[:count]] = True
    return flags


def create_item(spec: CorpusSpec, index: int, vibrato: bool) -> CorpusItem:
    rng = np.random.default_rng([spec.seed, index])
    melody = create_random_melody(
        rng, spec.base_pitch_range, spec.note_count_range, spec.frame_rate, 2 ** spec.levels
    )
    contour = F0Contour(np.where(melody.voiced, np.exp(melody.log_f0), 0.0), melody.voiced, spec.frame_rate)

    rate = extent = twin = None
    if vibrato or spec.paired:
        drawn_rate = float(rng.uniform(*spec.rate_range))
        drawn_extent = float(rng.uniform(*spec.extent_range))
        vibrated = add_note_vibrato(rng, contour, melody.plateaus, drawn_rate, drawn_extent, spec.phase_locked)
        if vibrato:
            rate, extent = drawn_rate, drawn_extent
            contour, twin = vibrated, contour
        else:
            twin = vibrated
        if not spec.paired:
            twin = None

    if spec.jitter_cents_rms > 0:
        # the twin shares the item's jitter so the pair differs only in vibrato
        jitter = rng.normal(0.0, spec.jitter_cents_rms / 1200.0 * np.log(2.0), size=len(contour))
        contour = _jittered(contour, jitter)
        if twin is not None:
            twin = _jittered(twin, jitter)

    return CorpusItem(
        id=f"item_{index:04d}",
        contour=contour,
        label="vibrato" if vibrato else "straight",
        rate=rate,
        extent_cents=extent,
        twin=twin,
    )


def _jittered(contour: F0Contour, jitter: np.ndarray) -> F0Contour:
    return F0Contour(contour.f0_hz * np.exp(np.where(contour.voiced, jitter, 0.0)), contour.voiced, contour.frame_rate)


def build_corpus(spec: CorpusSpec, workers: int = 1) -> List[CorpusItem]:
    """Generate every item in memory, ordered by id"""
    flags = vibrato_assignment(spec)
    if workers <= 1:
        return [create_item(spec, index, bool(flags[index])) for index in range(spec.items)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(create_item, spec, index, bool(flags[index])) for index in range(spec.items)]
        return [fut.result() for fut in futs]


def gen_corpus(spec: CorpusSpec, out_dir: Union[str, Path], workers: int = 1) -> dict:
    """
    Write a corpus to disk.

    Args:
        spec: corpus parameters
        out_dir: target directory (created if missing)
        workers: threads used to build items

    Returns:
        dict: the manifest {spec, items:[{id, path, label, rate, extent_cents}]}
    """
    out_dir = Path(out_dir)
    (out_dir / CONTOUR_DIR).mkdir(parents=True, exist_ok=True)
    items = build_corpus(spec, workers)

    entries = []
    for item in items:
        relative = f"{CONTOUR_DIR}/{item.id}.json"
        write_contour(out_dir / relative, item.contour)
        entries.append({
            "id": item.id,
            "path": relative,
            "label": item.label,
            "rate": item.rate,
            "extent_cents": item.extent_cents,
        })
    manifest = {"spec": spec.model_dump(mode="json"), "items": entries}
    save_to_json(manifest, out_dir / MANIFEST_NAME)
    vibrato_count = sum(1 for item in items if item.label == "vibrato")
    logger.info(f"Wrote {len(items)} contours ({vibrato_count} vibrato) to {out_dir}")
    return manifest


def load_corpus(corpus_dir: Union[str, Path]) -> List[CorpusItem]:
    """Read a corpus written by gen_corpus"""
    corpus_dir = Path(corpus_dir)
    with open(corpus_dir / MANIFEST_NAME, 'r', encoding='utf-8') as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ContourSchemaError(f"Corpus manifest {corpus_dir / MANIFEST_NAME} is not valid JSON: {e}") from e
    try:
        manifest = Manifest.model_validate(raw)
    except ValidationError as e:
        raise ContourSchemaError(f"Invalid corpus manifest {corpus_dir / MANIFEST_NAME}: {e}") from e

    items = [
        CorpusItem(
            id=entry.id,
            contour=read_contour(corpus_dir / entry.path),
            label=entry.label,
            rate=entry.rate,
            extent_cents=entry.extent_cents,
        )
        for entry in sorted(manifest.items, key=lambda entry: entry.id)
    ]
    logger.info(f"Loaded {len(items)} corpus items from {corpus_dir}")
    return items
