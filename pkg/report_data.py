import concurrent.futures
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
import pandas as pd

from pitchFunctions.create_corpus.populate_corpus import CorpusItem, load_corpus
from pitchFunctions.errors import EmptyCorpusError
from pitchFunctions.signal_io import F0Contour
from pitchFunctions.style_engine import ScalingSpec, VibratoParams, decompose, recompose, vibrato_modulation
from pitchFunctions.vibrato_analysis import DetectorConfig, estimate, level_energy_capture, style_accuracy

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.1, 0.3, 0.5, 0.7, 1.0, 2.0)
SWEEP_LEVELS = tuple(range(1, 7))


def _map(func, items: Sequence, workers: int) -> List:
    """Apply func to every item, in parallel when workers > 1, keeping input order"""
    if workers <= 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items))


def _alpha_key(alpha: float) -> str:
    return repr(float(alpha))


def per_alpha_accuracy(
    items: Sequence[CorpusItem],
    alphas: Iterable[float] = DEFAULT_ALPHAS,
    levels: int = 4,
    config: DetectorConfig = DetectorConfig(),
    workers: int = 1,
) -> Dict[str, float]:
    """
    For every α, the fraction of vibrato-labelled items whose high band,
    scaled by α, is still detected as vibrato.
    """
    alphas = [float(a) for a in alphas]
    vibrato_items = [item for item in items if item.label == "vibrato"]
    if not vibrato_items:
        raise EmptyCorpusError("corpus has no vibrato-labelled items to scale")

    def detect_scaled(item: CorpusItem) -> List[bool]:
        bands = decompose(item.contour, levels)
        return [
            estimate(recompose(bands, ScalingSpec(global_factor=alpha)), levels, config=config).label == "vibrato"
            for alpha in alphas
        ]

    hits = np.array(_map(detect_scaled, vibrato_items, workers))
    accuracies = hits.mean(axis=0)
    return {_alpha_key(alpha): float(acc) for alpha, acc in zip(alphas, accuracies)}


def level_sweep(
    levels: Iterable[int] = SWEEP_LEVELS,
    frame_rate: float = 24000 / 256,
    rate: float = 5.0,
    extent: float = 50.0,
    seconds: float = 4.0,
    base_hz: float = 220.0,
) -> Dict[str, float]:
    """High-band capture of a known vibrato on a flat note for each DWT level"""
    n_frames = int(round(seconds * frame_rate))
    modulation = vibrato_modulation(n_frames, frame_rate, VibratoParams(rate=rate, extent=extent))
    contour = F0Contour.from_hz(base_hz * np.exp(modulation), frame_rate)
    return {str(level): level_energy_capture(contour, level, modulation) for level in levels}


def evaluate(
    corpus: Union[str, Path, Sequence[CorpusItem]],
    alphas: Iterable[float] = DEFAULT_ALPHAS,
    levels: int = 4,
    config: DetectorConfig = DetectorConfig(),
    workers: int = 1,
) -> Dict[str, Any]:
    """
    Style accuracy, per-α accuracy and the DWT level sweep for one corpus.

    Parameters:
    - corpus: corpus directory written by gen_corpus, or already loaded items
    - alphas: vibrato scaling factors to sweep
    - levels: DWT level for the band split
    - workers: threads for per-item work

    Returns:
    Dictionary {style_accuracy, per_alpha_accuracy, level_capture}
    """
    items = load_corpus(corpus) if isinstance(corpus, (str, Path)) else list(corpus)
    if not items:
        raise EmptyCorpusError("corpus is empty")

    accuracy = style_accuracy([(item.contour, item.label) for item in items], levels, config)

    result = {
        "style_accuracy": accuracy,
        "per_alpha_accuracy": per_alpha_accuracy(items, alphas, levels, config, workers),
        "level_capture": level_sweep(frame_rate=items[0].contour.frame_rate),
    }
    logger.info(f"Style accuracy {accuracy:.3f} over {len(items)} items")
    for alpha, acc in result["per_alpha_accuracy"].items():
        logger.info(f"  alpha {alpha}: {acc:.3f}")
    return result


def write_report_csvs(result: Dict[str, Any], csv_dir: Union[str, Path]) -> List[Path]:
    """Write per_alpha.csv (alpha, accuracy) and level_capture.csv (level, capture)"""
    csv_dir = Path(csv_dir)
    csv_dir.mkdir(parents=True, exist_ok=True)

    per_alpha = pd.DataFrame(
        [{"alpha": float(alpha), "accuracy": acc} for alpha, acc in result["per_alpha_accuracy"].items()]
    ).sort_values("alpha")
    capture = pd.DataFrame(
        [{"level": int(level), "capture": value} for level, value in result["level_capture"].items()]
    ).sort_values("level")

    paths = [csv_dir / "per_alpha.csv", csv_dir / "level_capture.csv"]
    per_alpha.to_csv(paths[0], index=False, lineterminator='\n')
    capture.to_csv(paths[1], index=False, lineterminator='\n')
    logger.info(f"Wrote {', '.join(str(p) for p in paths)}")
    return paths
