"""
Windowed feed-forward pitch style converter.

The model maps a window of the low log-F0 band (mean-centred), the voiced
flags and a learned style vector to the high band of the same window. It is
a plain numpy MLP (tanh hidden layers, linear output) trained with an L1
reconstruction loss and fixed-step SGD.
"""
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator

from pitchFunctions.create_corpus.populate_corpus import CorpusSpec
from pitchFunctions.errors import (
    CheckpointError,
    DegenerateContourError,
    ShapeError,
    TrainingDivergedError,
    TrainingError,
)
from pitchFunctions.json_utils import save_to_json
from pitchFunctions.signal_io import F0Contour
from pitchFunctions.style_engine import ScalingSpec, StyleBands, decompose, recompose

logger = logging.getLogger(__name__)

STYLES = ("straight", "vibrato")
CHECKPOINT_VERSION = 1

Style = Union[str, int]


def style_index(style: Style) -> int:
    if isinstance(style, (int, np.integer)):
        if not 0 <= int(style) < len(STYLES):
            raise ShapeError(f"style index {style} out of range")
        return int(style)
    if style not in STYLES:
        raise ShapeError(f"unknown style {style!r}, expected one of {STYLES}")
    return STYLES.index(style)


@dataclass(frozen=True, eq=False)
class ConverterModel:
    window: int
    hidden_sizes: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    style_vectors: np.ndarray
    seed: int
    trained_steps: int = 0

    @classmethod
    def initialize(
        cls,
        window: int = 64,
        hidden_sizes: Sequence[int] = (128, 128),
        style_dim: int = 16,
        seed: int = 0,
    ) -> "ConverterModel":
        """Glorot-uniform weights, zero biases, standard-normal style vectors"""
        rng = np.random.default_rng(seed)
        sizes = [2 * window + style_dim, *hidden_sizes, window]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        style_vectors = rng.normal(0.0, 1.0, size=(len(STYLES), style_dim))
        return cls(window, tuple(hidden_sizes), tuple(weights), tuple(biases), style_vectors, seed)

    @property
    def style_dim(self) -> int:
        return self.style_vectors.shape[1]

    def params(self) -> Dict[str, np.ndarray]:
        named = {"style_vectors": self.style_vectors}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            named[f"W{i}"] = w
            named[f"b{i}"] = b
        return named

    def with_params(self, named: Dict[str, np.ndarray], trained_steps: Optional[int] = None) -> "ConverterModel":
        layers = len(self.weights)
        return replace(
            self,
            weights=tuple(named[f"W{i}"] for i in range(layers)),
            biases=tuple(named[f"b{i}"] for i in range(layers)),
            style_vectors=named["style_vectors"],
            trained_steps=self.trained_steps if trained_steps is None else trained_steps,
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params().values())


class TrainConfig(BaseModel):
    learning_rate: float = 1e-3
    steps: int = 20000
    batch: int = 32
    seed: int = 0
    levels: int = 4
    log_every: int = 100

    @field_validator("learning_rate")
    @classmethod
    def _check_rate(cls, value: float) -> float:
        # zero is allowed and leaves the weights untouched
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"learning_rate must be finite and >= 0, got {value}")
        return value

    @field_validator("steps", "batch", "levels", "log_every")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value


@dataclass(frozen=True, eq=False)
class WindowBatch:
    """B training windows: centred low band, voiced flags, style index, high-band target"""

    low: np.ndarray
    flags: np.ndarray
    styles: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.low)

    def take(self, index: np.ndarray) -> "WindowBatch":
        return WindowBatch(self.low[index], self.flags[index], self.styles[index], self.targets[index])


def training_corpus_spec(items: int = 200, seed: int = 0, levels: int = 4, frame_rate: float = 24000 / 256) -> CorpusSpec:
    """
    Corpus used to train the converter: vibrato at one cycle per 2**levels
    frames with phase tied to absolute time, so every training window
    (which starts on a 2**levels grid) sees the same vibrato phase. Every
    item also carries its twin in the other style.
    """
    rate = frame_rate / 2 ** levels
    return CorpusSpec(
        items=items,
        seed=seed,
        levels=levels,
        frame_rate=frame_rate,
        rate_range=(rate, rate),
        phase_locked=True,
        paired=True,
    )


def _centre(low_windows: np.ndarray) -> np.ndarray:
    return low_windows - low_windows.mean(axis=-1, keepdims=True)


def make_windows(corpus: Sequence, window: int, levels: int = 4, stride: Optional[int] = None) -> WindowBatch:
    """
    Cut decomposed corpus contours into training windows.

    Items carrying a ``twin`` (the same melody in the other style) add a
    second window per position: the item's own low band with the opposite
    style index and the twin's high band as target.

    Args:
        corpus: items with ``contour`` and ``label`` attributes, or (contour, label) pairs
        window: frames per window
        levels: DWT level used for the band split
        stride: window start spacing, defaults to 2**levels

    Returns:
        WindowBatch: every window holding at least one voiced frame
    """
    stride = stride or 2 ** levels
    lows, flags, styles, targets = [], [], [], []
    for item in corpus:
        contour, label = (item.contour, item.label) if hasattr(item, "contour") else item
        twin = getattr(item, "twin", None)
        bands = decompose(contour, levels)
        twin_high = decompose(twin, levels).high if twin is not None else None
        for start in range(0, len(bands) - window + 1, stride):
            voiced = bands.voiced[start:start + window]
            if not voiced.any():
                continue
            lows.append(bands.low[start:start + window])
            flags.append(voiced.astype(np.float64))
            styles.append(style_index(label))
            targets.append(bands.high[start:start + window])
            if twin_high is not None:
                lows.append(lows[-1])
                flags.append(flags[-1])
                styles.append(1 - styles[-1])
                targets.append(twin_high[start:start + window])
    if not lows:
        return WindowBatch(np.zeros((0, window)), np.zeros((0, window)), np.zeros(0, dtype=int), np.zeros((0, window)))
    return WindowBatch(_centre(np.array(lows)), np.array(flags), np.array(styles, dtype=int), np.array(targets))


def _inputs(model: ConverterModel, low: np.ndarray, flags: np.ndarray, styles: np.ndarray) -> np.ndarray:
    return np.concatenate([low, flags, model.style_vectors[styles]], axis=1)


def _forward_batch(model: ConverterModel, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    activations = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
        activations.append(h)
    return h, activations


def _check_batch(model: ConverterModel, batch: WindowBatch) -> None:
    if len(batch) == 0:
        raise ShapeError("batch is empty")
    expected = (len(batch), model.window)
    for name in ("low", "flags", "targets"):
        if getattr(batch, name).shape != expected:
            raise ShapeError(f"batch {name} has shape {getattr(batch, name).shape}, expected {expected}")


def forward(model: ConverterModel, low_window, flags, style: Style) -> np.ndarray:
    """
    Predict the high band of one window.

    Args:
        model: converter
        low_window: W mean-centred low-band log-F0 values
        flags: W voiced flags
        style: "straight", "vibrato" or its index

    Returns:
        np.ndarray: W predicted high-band values
    """
    low_window = np.asarray(low_window, dtype=np.float64)
    flags = np.asarray(flags, dtype=np.float64)
    if low_window.shape != (model.window,) or flags.shape != (model.window,):
        raise ShapeError(
            f"expected windows of {model.window} frames, got {low_window.shape} and {flags.shape}"
        )
    if not (np.all(np.isfinite(low_window)) and np.all(np.isfinite(flags))):
        raise ShapeError("window inputs must be finite")
    x = _inputs(model, low_window[None, :], flags[None, :], np.array([style_index(style)]))
    y, _ = _forward_batch(model, x)
    return y[0]


def predict(model: ConverterModel, batch: WindowBatch) -> np.ndarray:
    y, _ = _forward_batch(model, _inputs(model, batch.low, batch.flags, batch.styles))
    return y


def loss(model: ConverterModel, batch: WindowBatch) -> float:
    """Mean absolute error between predicted and target high-band windows"""
    _check_batch(model, batch)
    return float(np.mean(np.abs(predict(model, batch) - batch.targets)))


def loss_and_gradients(model: ConverterModel, batch: WindowBatch) -> Tuple[float, Dict[str, np.ndarray]]:
    _check_batch(model, batch)
    x = _inputs(model, batch.low, batch.flags, batch.styles)
    y, activations = _forward_batch(model, x)
    residual = y - batch.targets
    value = float(np.mean(np.abs(residual)))

    grads: Dict[str, np.ndarray] = {}
    delta = np.sign(residual) / residual.size
    for i in reversed(range(len(model.weights))):
        grads[f"W{i}"] = activations[i].T @ delta
        grads[f"b{i}"] = delta.sum(axis=0)
        delta = delta @ model.weights[i].T
        if i > 0:
            delta = delta * (1.0 - activations[i] ** 2)

    style_grad = np.zeros_like(model.style_vectors)
    np.add.at(style_grad, batch.styles, delta[:, 2 * model.window:])
    grads["style_vectors"] = style_grad
    return value, grads


def smoothed_loss(history: Sequence[float], span: int = 5) -> Tuple[float, float]:
    """(initial, final) mean over the first and last ``span`` logged values"""
    if len(history) == 0:
        raise TrainingError("loss history is empty")
    span = min(span, len(history))
    return float(np.mean(history[:span])), float(np.mean(history[-span:]))


def train(model: ConverterModel, corpus: Sequence, config: TrainConfig = TrainConfig()) -> Tuple[ConverterModel, List[float]]:
    """
    Fit the converter with minibatch SGD on windows cut from the corpus.

    Returns:
        (ConverterModel, list): trained model and the loss logged every
        ``log_every`` steps, starting at step 0

    Raises:
        TrainingError: fewer windows than one batch
        TrainingDivergedError: loss became non-finite
    """
    windows = corpus if isinstance(corpus, WindowBatch) else make_windows(corpus, model.window, config.levels)
    if len(windows) < config.batch:
        raise TrainingError(f"corpus yields {len(windows)} windows, need at least {config.batch}")
    logger.info(f"Training on {len(windows)} windows for {config.steps} steps")

    rng = np.random.default_rng(config.seed)
    params = {name: value.copy() for name, value in model.params().items()}
    current = model
    history: List[float] = []
    for step in range(config.steps):
        batch = windows.take(rng.integers(0, len(windows), size=config.batch))
        value, grads = loss_and_gradients(current, batch)
        if not np.isfinite(value):
            raise TrainingDivergedError(f"loss became {value} at step {step}")
        if step % config.log_every == 0:
            history.append(value)
            logger.info(f"step {step}: loss {value:.6f}")
        for name in params:
            params[name] = params[name] - config.learning_rate * grads[name]
        current = current.with_params(params)

    trained = current.with_params(params, trained_steps=model.trained_steps + config.steps)
    if not trained.is_finite():
        raise TrainingDivergedError("weights became non-finite during training")
    initial, final = smoothed_loss(history)
    logger.info(f"Training finished: smoothed loss {initial:.5f} -> {final:.5f}")
    return trained, history


def _residual_signs(model: ConverterModel, batch: WindowBatch) -> np.ndarray:
    return np.sign(predict(model, batch) - batch.targets)


def numeric_derivative(
    model: ConverterModel,
    sample: WindowBatch,
    name: str,
    index: Tuple[int, ...],
    epsilon: float,
    signs: Optional[np.ndarray] = None,
) -> float:
    """
    Central difference of the L1 loss along one parameter coordinate.

    The residual signs are held at ``signs`` (the unperturbed ones by
    default), which matches the subgradient backprop takes at a kink.
    """
    if signs is None:
        signs = _residual_signs(model, sample)
    params = model.params()
    shifted = {}
    for direction in (1.0, -1.0):
        value = params[name].copy()
        value[index] += direction * epsilon
        shifted[direction] = predict(model.with_params({**params, name: value}), sample)
    # difference taken per element so round-off scales with the change, not the loss
    return float(np.mean(signs * (shifted[1.0] - shifted[-1.0])) / (2.0 * epsilon))


def grad_check_details(
    model: ConverterModel,
    sample: WindowBatch,
    epsilon: float = 1e-5,
    coordinates: int = 100,
    seed: int = 0,
) -> Tuple[float, int]:
    """
    Compare analytic gradients with central differences on random coordinates.

    Returns:
        (float, int): max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
        and the number of coordinates checked

    Raises:
        TrainingError: no coordinate could be checked
    """
    _, grads = loss_and_gradients(model, sample)
    params = model.params()
    names = list(params)
    sizes = np.array([params[name].size for name in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    order = np.random.default_rng(seed).permutation(offsets[-1])[:coordinates]

    signs = _residual_signs(model, sample)
    worst = 0.0
    checked = 0
    for flat in order:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[k]
        index = np.unravel_index(flat - offsets[k], params[name].shape)
        numeric = numeric_derivative(model, sample, name, index, epsilon, signs)
        analytic = float(grads[name][index])
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
        checked += 1

    if checked == 0:
        raise TrainingError("gradient check had no coordinates to compare")
    logger.debug(f"Gradient check over {checked} coordinates: max relative error {worst:.3e}")
    return worst, checked


def grad_check(
    model: ConverterModel,
    sample: WindowBatch,
    epsilon: float = 1e-5,
    coordinates: int = 100,
    seed: int = 0,
) -> float:
    """Max relative gradient error over ``coordinates`` random parameters, see grad_check_details"""
    worst, _ = grad_check_details(model, sample, epsilon, coordinates, seed)
    return worst


def predict_high_band(model: ConverterModel, bands: StyleBands, target_style: Style) -> np.ndarray:
    """
    High band the model predicts for target_style over a whole contour.

    Windows hop by W/2 and are blended with triangular weights; the tail is
    edge-padded to a whole number of windows.

    Raises:
        DegenerateContourError: contour shorter than one window
    """
    window, hop = model.window, model.window // 2
    n = len(bands)
    if n < window:
        raise DegenerateContourError(f"contour of {n} frames is shorter than one window ({window})")
    count = int(np.ceil((n - window) / hop)) + 1
    padded = (count - 1) * hop + window
    low = np.pad(bands.low, (0, padded - n), mode="edge")
    voiced = np.pad(bands.voiced.astype(np.float64), (0, padded - n), mode="edge")

    starts = np.arange(count) * hop
    index = starts[:, None] + np.arange(window)[None, :]
    styles = np.full(count, style_index(target_style))
    batch = WindowBatch(_centre(low[index]), voiced[index], styles, np.zeros((count, window)))
    predicted = predict(model, batch)

    taper = 1.0 - np.abs(np.arange(window) - (window - 1) / 2.0) / (window / 2.0)
    acc = np.zeros(padded)
    weight = np.zeros(padded)
    for start, values in zip(starts, predicted):
        acc[start:start + window] += taper * values
        weight[start:start + window] += taper
    return (acc / weight)[:n]


def convert_style(model: ConverterModel, contour: F0Contour, target_style: Style, levels: int = 4) -> F0Contour:
    """
    Replace a contour's high band with the model's prediction for target_style.

    The low band is passed through unchanged and unvoiced frames come out
    at f0 = 0.

    Raises:
        TrainingError: model untrained or weights not finite
        DegenerateContourError: contour shorter than one window
    """
    if model.trained_steps == 0:
        raise TrainingError("model has not been trained")
    if not model.is_finite():
        raise TrainingError("model weights are not finite")
    if len(contour) < model.window:
        raise DegenerateContourError(f"contour of {len(contour)} frames is shorter than one window ({model.window})")
    bands = decompose(contour, levels)
    return recompose(bands.with_high(predict_high_band(model, bands, target_style)), ScalingSpec())


class _LayerRecord(BaseModel):
    W: List[List[float]]
    b: List[float]


class CheckpointFile(BaseModel):
    format_version: int
    window: int
    hidden_sizes: List[int]
    seed: int
    trained_steps: int = 0
    layers: List[_LayerRecord]
    style_vectors: List[List[float]]

    @field_validator("format_version")
    @classmethod
    def _supported(cls, value: int) -> int:
        if value != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint format_version {value}, expected {CHECKPOINT_VERSION}")
        return value


def save_checkpoint(model: ConverterModel, path: Union[str, Path]) -> Path:
    record = {
        "format_version": CHECKPOINT_VERSION,
        "window": model.window,
        "hidden_sizes": list(model.hidden_sizes),
        "seed": model.seed,
        "trained_steps": model.trained_steps,
        "layers": [{"W": w, "b": b} for w, b in zip(model.weights, model.biases)],
        "style_vectors": model.style_vectors,
    }
    path = save_to_json(record, path)
    logger.info(f"Saved converter checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> ConverterModel:
    """
    Raises:
        CheckpointError: wrong version, malformed record or inconsistent shapes
    """
    with open(path, 'r', encoding='utf-8') as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise CheckpointError(f"Checkpoint {path} is not valid JSON: {e}") from e
    try:
        record = CheckpointFile.model_validate(raw)
    except ValidationError as e:
        raise CheckpointError(f"Invalid checkpoint {path}: {e}") from e

    weights = tuple(np.array(layer.W, dtype=np.float64) for layer in record.layers)
    biases = tuple(np.array(layer.b, dtype=np.float64) for layer in record.layers)
    style_vectors = np.array(record.style_vectors, dtype=np.float64)
    sizes = [2 * record.window + style_vectors.shape[-1], *record.hidden_sizes, record.window]
    if len(weights) != len(sizes) - 1:
        raise CheckpointError(f"checkpoint has {len(weights)} layers, expected {len(sizes) - 1}")
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
            raise CheckpointError(f"layer {i} has shapes {w.shape}/{b.shape}, expected ({sizes[i]}, {sizes[i + 1]})")
    if style_vectors.ndim != 2 or style_vectors.shape[0] != len(STYLES):
        raise CheckpointError(f"style_vectors has shape {style_vectors.shape}")
    return ConverterModel(
        record.window, tuple(record.hidden_sizes), weights, biases, style_vectors, record.seed, record.trained_steps
    )
