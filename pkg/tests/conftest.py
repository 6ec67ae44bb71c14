import numpy as np
import pytest

from pitchFunctions.converter_model import ConverterModel, TrainConfig, train, training_corpus_spec
from pitchFunctions.create_corpus.populate_corpus import build_corpus
from pitchFunctions.signal_io import AudioBuffer, F0Contour
from pitchFunctions.style_engine import VibratoParams, synth_vibrato

SAMPLE_RATE = 24000
HOP = 256
FRAME_RATE = SAMPLE_RATE / HOP


def make_tone(freq: float, seconds: float = 1.0, amplitude: float = 0.5, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    t = np.arange(int(seconds * sample_rate)) / sample_rate
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq * t), sample_rate)


def flat(hz: float = 220.0, frames: int = 384, frame_rate: float = FRAME_RATE) -> F0Contour:
    return F0Contour.from_hz(np.full(frames, hz), frame_rate)


def with_vibrato(contour: F0Contour, rate: float = 6.0, extent: float = 50.0, phase: float = 0.0) -> F0Contour:
    return synth_vibrato(contour, VibratoParams(rate=rate, extent=extent, phase=phase))


def cents(a, b) -> np.ndarray:
    return 1200.0 * np.log2(np.asarray(a) / np.asarray(b))


@pytest.fixture
def flat_contour():
    return flat()


@pytest.fixture
def vibrato_contour():
    return with_vibrato(flat())


@pytest.fixture(scope="session")
def trained_converter():
    """Converter trained once per session with the default configuration"""
    corpus = build_corpus(training_corpus_spec())
    model = ConverterModel.initialize()
    trained, history = train(model, corpus, TrainConfig())
    return model, trained, history
