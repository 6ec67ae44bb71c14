import json

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import FRAME_RATE, flat
from pitchFunctions.converter_model import (
    ConverterModel,
    TrainConfig,
    WindowBatch,
    convert_style,
    forward,
    grad_check,
    grad_check_details,
    load_checkpoint,
    loss,
    loss_and_gradients,
    make_windows,
    numeric_derivative,
    predict,
    predict_high_band,
    save_checkpoint,
    smoothed_loss,
    train,
    training_corpus_spec,
)
from pitchFunctions.create_corpus.populate_corpus import build_corpus
from pitchFunctions.errors import CheckpointError, DegenerateContourError, ShapeError, TrainingError
from pitchFunctions.style_engine import decompose, mean_f0


@pytest.fixture(scope="module")
def held_out():
    return build_corpus(training_corpus_spec(items=12, seed=101))


@pytest.fixture(scope="module")
def held_out_windows(held_out):
    return make_windows(held_out, 64)


def small_model(seed: int = 0) -> ConverterModel:
    return ConverterModel.initialize(window=16, hidden_sizes=(8,), style_dim=4, seed=seed)


def zeroed(model: ConverterModel) -> ConverterModel:
    return model.with_params({name: np.zeros_like(value) for name, value in model.params().items()})


def test_zero_weights_give_zero_prediction():
    model = zeroed(ConverterModel.initialize())
    out = forward(model, np.random.default_rng(0).standard_normal(64), np.ones(64), "vibrato")
    np.testing.assert_array_equal(out, np.zeros(64))


def test_initialization_is_seeded():
    a, b = ConverterModel.initialize(seed=3), ConverterModel.initialize(seed=3)
    for name, value in a.params().items():
        np.testing.assert_array_equal(value, b.params()[name])
    assert a.weights[0].shape == (2 * 64 + 16, 128)
    assert a.weights[-1].shape == (128, 64)
    assert a.style_dim == 16


def test_forward_is_deterministic():
    model = ConverterModel.initialize()
    low = np.linspace(-0.1, 0.1, 64)
    np.testing.assert_array_equal(forward(model, low, np.ones(64), 1), forward(model, low, np.ones(64), "vibrato"))


def test_forward_shape_errors():
    model = ConverterModel.initialize()
    with pytest.raises(ShapeError):
        forward(model, np.zeros(32), np.ones(32), "straight")
    with pytest.raises(ShapeError):
        forward(model, np.zeros(64), np.ones(64), "falsetto")
    with pytest.raises(ShapeError):
        forward(model, np.full(64, np.nan), np.ones(64), "straight")


def test_l1_loss_of_zero_prediction():
    model = zeroed(small_model())
    peak = 0.03
    targets = peak * np.sin(2 * np.pi * np.arange(16) / 16)[None, :].repeat(4, axis=0)
    batch = WindowBatch(np.zeros((4, 16)), np.ones((4, 16)), np.zeros(4, dtype=int), targets)
    assert loss(model, batch) == pytest.approx(2 / np.pi * peak, rel=0.02)
    assert loss(model, WindowBatch(batch.low, batch.flags, batch.styles, np.zeros((4, 16)))) == 0.0


def test_empty_batch_is_rejected():
    model = small_model()
    empty = WindowBatch(np.zeros((0, 16)), np.zeros((0, 16)), np.zeros(0, dtype=int), np.zeros((0, 16)))
    with pytest.raises(ShapeError):
        loss(model, empty)


def test_make_windows_skips_unvoiced(held_out):
    windows = make_windows(held_out[:2], 64)
    assert windows.low.shape[1] == 64
    assert np.all(windows.flags.sum(axis=1) > 0)
    np.testing.assert_allclose(windows.low.mean(axis=1), 0.0, atol=1e-12)


def test_zero_learning_rate_keeps_weights(held_out):
    model = small_model()
    trained, history = train(model, held_out[:4], TrainConfig(learning_rate=0.0, steps=3, batch=4, log_every=1))
    for name, value in model.params().items():
        np.testing.assert_array_equal(trained.params()[name], value)
    assert trained.trained_steps == 3
    assert len(history) == 3


def test_training_is_reproducible(held_out):
    config = TrainConfig(steps=20, batch=8, log_every=1, learning_rate=0.01)
    _, first = train(small_model(), held_out[:4], config)
    _, second = train(small_model(), held_out[:4], config)
    assert first == second


def test_too_few_windows():
    with pytest.raises(TrainingError):
        train(small_model(), [(flat(frames=16), "straight")], TrainConfig(steps=1, batch=32))


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValidationError):
        TrainConfig(batch=0)


def test_smoothed_loss():
    assert smoothed_loss([5.0, 4.0, 3.0, 2.0, 1.0, 0.5], span=2) == (4.5, 0.75)
    with pytest.raises(TrainingError):
        smoothed_loss([])


def test_loss_decreases(trained_converter):
    _, _, history = trained_converter
    initial, final = smoothed_loss(history)
    assert final <= 0.2 * initial


def test_gradient_check_before_and_after(trained_converter, held_out_windows):
    model, trained, _ = trained_converter
    sample = held_out_windows.take(np.arange(8))
    for candidate in (model, trained):
        worst, checked = grad_check_details(candidate, sample)
        assert checked >= 100
        assert worst < 1e-4
    assert grad_check(trained, sample) == grad_check_details(trained, sample)[0]


def test_gradient_check_needs_coordinates():
    with pytest.raises(TrainingError):
        grad_check(small_model(), make_windows([(flat(), "straight")], 16).take(np.arange(2)), coordinates=0)


def test_central_difference_error_is_second_order(trained_converter, held_out_windows):
    model, _, _ = trained_converter
    sample = held_out_windows.take(np.arange(8))
    _, grads = loss_and_gradients(model, sample)
    rng = np.random.default_rng(4)
    for _ in range(200):
        index = (int(rng.integers(0, 64)), int(rng.integers(0, 128)))
        analytic = grads["W0"][index]
        coarse = abs(numeric_derivative(model, sample, "W0", index, 1e-2) - analytic)
        if coarse <= 1e-10:
            continue
        fine = abs(numeric_derivative(model, sample, "W0", index, 1e-3) - analytic)
        assert fine <= coarse / 20
        return
    pytest.fail("no W0 coordinate with measurable truncation error")


def test_styles_are_separated(trained_converter, held_out_windows):
    _, trained, _ = trained_converter
    batch = held_out_windows

    def as_style(index):
        return WindowBatch(batch.low, batch.flags, np.full(len(batch), index), batch.targets)

    straight_rms = np.sqrt(np.mean(predict(trained, as_style(0)) ** 2))
    vibrato_rms = np.sqrt(np.mean(predict(trained, as_style(1)) ** 2))
    assert straight_rms * 3 <= vibrato_rms


def test_straight_conversion_of_flat_contour(trained_converter):
    _, trained, _ = trained_converter
    converted = convert_style(trained, flat(), "straight")
    assert np.sqrt(np.mean(np.log(converted.f0_hz / 220.0) ** 2)) <= 0.0029


def test_conversion_keeps_voicing_and_register(trained_converter, held_out):
    _, trained, _ = trained_converter
    source = held_out[0].contour
    converted = convert_style(trained, source, "vibrato")
    np.testing.assert_array_equal(converted.voiced, source.voiced)
    assert np.all(converted.f0_hz[~source.voiced] == 0.0)
    assert abs(1200 * np.log2(mean_f0(converted) / mean_f0(source))) < 20.0
    assert len(decompose(converted).low) == len(source)


def test_conversion_only_replaces_high_band(trained_converter, held_out):
    _, trained, _ = trained_converter
    source = held_out[1].contour
    bands = decompose(source)
    predicted = predict_high_band(trained, bands, "straight")
    converted = convert_style(trained, source, "straight")
    voiced = source.voiced
    np.testing.assert_allclose(np.log(converted.f0_hz[voiced]) - bands.low[voiced], predicted[voiced], rtol=0, atol=1e-12)


def test_untrained_model_cannot_convert():
    with pytest.raises(TrainingError):
        convert_style(ConverterModel.initialize(), flat(), "straight")


def test_contour_shorter_than_window(trained_converter):
    _, trained, _ = trained_converter
    with pytest.raises(DegenerateContourError):
        convert_style(trained, flat(frames=32), "straight")


def test_checkpoint_round_trip(tmp_path, trained_converter):
    _, trained, _ = trained_converter
    path = save_checkpoint(trained, tmp_path / "converter.json")
    restored = load_checkpoint(path)
    assert restored.trained_steps == trained.trained_steps
    assert restored.hidden_sizes == trained.hidden_sizes
    low = np.linspace(-0.05, 0.05, 64)
    np.testing.assert_allclose(
        forward(restored, low, np.ones(64), "vibrato"), forward(trained, low, np.ones(64), "vibrato"), rtol=1e-12
    )


def test_checkpoint_version_mismatch(tmp_path):
    path = save_checkpoint(small_model(), tmp_path / "model.json")
    record = json.loads(path.read_text(encoding='utf-8'))
    record["format_version"] = 2
    path.write_text(json.dumps(record), encoding='utf-8')
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_shape_mismatch(tmp_path):
    path = save_checkpoint(small_model(), tmp_path / "model.json")
    record = json.loads(path.read_text(encoding='utf-8'))
    record["hidden_sizes"] = [9]
    path.write_text(json.dumps(record), encoding='utf-8')
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_frame_rate_of_training_corpus():
    spec = training_corpus_spec()
    assert spec.rate_range == (FRAME_RATE / 16, FRAME_RATE / 16)
    assert spec.phase_locked
    assert spec.paired


def test_twins_add_opposite_style_windows(held_out):
    item = held_out[0]
    single = make_windows([(item.contour, item.label)], 64)
    doubled = make_windows([item], 64)
    assert len(doubled) == 2 * len(single)
    np.testing.assert_array_equal(doubled.low[0::2], single.low)
    np.testing.assert_array_equal(doubled.low[1::2], single.low)
    np.testing.assert_array_equal(doubled.styles[0::2] + doubled.styles[1::2], np.ones(len(single)))
    np.testing.assert_allclose(doubled.targets[1::2], make_windows([(item.twin, "straight")], 64).targets)


def test_checkpoint_that_is_not_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"format_version": 1, "layers": [', encoding='utf-8')
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
