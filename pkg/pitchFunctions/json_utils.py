import json
import logging
from pathlib import Path

import numpy as np

from pitchFunctions.errors import PitchStyleError

logger = logging.getLogger(__name__)


def convert_numpy_types(obj):
    """Convert numpy types to Python native types recursively in dictionaries and lists."""
    if isinstance(obj, dict):
        return {str(key): convert_numpy_types(value) for key, value in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [convert_numpy_types(item) for item in obj]
    elif isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        return float(obj)
    elif isinstance(obj, np.ndarray):
        return convert_numpy_types(obj.tolist())
    elif isinstance(obj, np.bool_):
        return bool(obj)
    else:
        return obj


def save_to_json(data, filename) -> Path:
    """Save a (possibly numpy-laden) dictionary to a UTF-8 JSON file with LF endings"""
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(convert_numpy_types(data), f, indent=2, sort_keys=False)
        f.write('\n')
    logger.debug(f"Data saved to {path}")
    return path


def load_json(filename):
    with open(filename, 'r', encoding='utf-8') as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise PitchStyleError(f"{filename} is not valid JSON: {e}") from e
