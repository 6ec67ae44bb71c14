import argparse
import json

import numpy as np
import pandas as pd
import pytest

from cli import parse_alphas, parse_frame_range, run
from conftest import FRAME_RATE, flat, make_tone, with_vibrato
from pitchFunctions.pitch_tracker import TrackerConfig, extract_f0
from pitchFunctions.signal_io import read_contour, read_wav, write_contour, write_wav
from pitchFunctions.style_engine import ScalingSpec, decompose, recompose


@pytest.fixture
def vibrato_file(tmp_path):
    path = tmp_path / "vibrato.json"
    write_contour(path, with_vibrato(flat()))
    return path


def test_parse_frame_range():
    assert parse_frame_range("100:200") == (100, 200, 0.0)
    assert parse_frame_range("1:5:2") == (1, 5, 2.0)
    for bad in ("5:1", "a:b", "1:2:3:4", "-1:4"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_frame_range(bad)


def test_parse_alphas():
    assert parse_alphas("0.1,1.0,2") == [0.1, 1.0, 2.0]
    with pytest.raises(argparse.ArgumentTypeError):
        parse_alphas("0.1,x")


def test_usage_errors_exit_2(tmp_path):
    assert run(["frobnicate"]) == 2
    assert run(["scale", str(tmp_path / "in.json")]) == 2
    assert run(["scale", "in.json", "-o", "out.json", "--frames", "9:3"]) == 2


def test_processing_errors_exit_1(tmp_path, capsys):
    assert run(["detect", str(tmp_path / "missing.json")]) == 1
    short = tmp_path / "short.json"
    write_contour(short, flat(frames=20))
    assert run(["detect", str(short)]) == 1
    assert "error:" in capsys.readouterr().err


def test_malformed_inputs_exit_1(tmp_path, vibrato_file, capsys):
    checkpoint = tmp_path / "broken.json"
    checkpoint.write_text("not json", encoding='utf-8')
    out = tmp_path / "out.json"
    assert run(["convert", str(vibrato_file), "-o", str(out), "--checkpoint", str(checkpoint), "--style", "straight"]) == 1

    header_only = tmp_path / "header_only.csv"
    header_only.write_text("# frame_rate=93.75\n", encoding='utf-8')
    assert run(["detect", str(header_only)]) == 1

    stats = tmp_path / "stats.json"
    stats.write_text("{", encoding='utf-8')
    assert run(["shift-range", str(vibrato_file), "-o", str(out), "--stats", str(stats), "--tgt", "alto"]) == 1

    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "manifest.json").write_text("[", encoding='utf-8')
    assert run(["eval", "--corpus", str(corpus), "-o", str(tmp_path / "report.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_extract(tmp_path):
    write_wav(tmp_path / "tone.wav", make_tone(330.0))
    assert run(["extract", str(tmp_path / "tone.wav"), "-o", str(tmp_path / "f0.json")]) == 0
    contour = read_contour(tmp_path / "f0.json")
    assert contour.frame_rate == pytest.approx(FRAME_RATE)
    assert np.median(contour.f0_hz[contour.voiced]) == pytest.approx(330.0, rel=0.01)


def test_file_pipeline_matches_in_process(tmp_path):
    buffer = make_tone(262.0, seconds=2.0)
    write_wav(tmp_path / "tone.wav", buffer)
    f0_file, bands_file, scaled_file = tmp_path / "f0.json", tmp_path / "bands.json", tmp_path / "scaled.json"
    assert run(["extract", str(tmp_path / "tone.wav"), "-o", str(f0_file)]) == 0
    assert run(["decompose", str(f0_file), "-o", str(bands_file)]) == 0
    assert run(["scale", str(f0_file), "-o", str(scaled_file), "--factor", "1.5"]) == 0

    contour = extract_f0(read_wav(tmp_path / "tone.wav"), TrackerConfig.from_settings())
    bands = decompose(contour)
    scaled = recompose(bands, ScalingSpec(global_factor=1.5))

    extracted = read_contour(f0_file)
    np.testing.assert_array_equal(extracted.voiced, contour.voiced)
    np.testing.assert_allclose(extracted.f0_hz[contour.voiced], contour.f0_hz[contour.voiced], rtol=1e-9)
    frames = json.loads(bands_file.read_text(encoding='utf-8'))["frames"]
    np.testing.assert_allclose([frame["low"] for frame in frames], bands.low, rtol=1e-9)
    np.testing.assert_allclose([frame["high"] for frame in frames], bands.high, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(read_contour(scaled_file).f0_hz, scaled.f0_hz, rtol=1e-9)


def test_scale_zero_equals_remove_vibrato(tmp_path, vibrato_file):
    scaled, removed = tmp_path / "scaled.json", tmp_path / "removed.json"
    assert run(["scale", str(vibrato_file), "-o", str(scaled), "--factor", "0"]) == 0
    assert run(["remove-vibrato", str(vibrato_file), "-o", str(removed)]) == 0
    np.testing.assert_allclose(read_contour(scaled).f0_hz, read_contour(removed).f0_hz)


def test_scale_frame_ranges(tmp_path, vibrato_file):
    out = tmp_path / "partial.csv"
    assert run(["scale", str(vibrato_file), "-o", str(out), "--frames", "0:100", "--frames", "200:300:2"]) == 0
    original, partial = read_contour(vibrato_file), read_contour(out)
    np.testing.assert_allclose(partial.f0_hz[100:200], original.f0_hz[100:200], rtol=1e-6)
    assert np.ptp(partial.f0_hz[10:90]) < np.ptp(original.f0_hz[10:90])
    assert np.ptp(partial.f0_hz[210:290]) > np.ptp(original.f0_hz[210:290])


def test_decompose_outputs(tmp_path, vibrato_file):
    assert run(["decompose", str(vibrato_file), "-o", str(tmp_path / "bands.csv")]) == 0
    lines = (tmp_path / "bands.csv").read_text(encoding='utf-8').split('\n')
    assert lines[0] == "# frame_rate=93.75 levels=4"
    frame = pd.read_csv(tmp_path / "bands.csv", comment="#")
    assert list(frame.columns) == ["frame", "low", "high", "voiced"]

    assert run(["decompose", str(vibrato_file), "-o", str(tmp_path / "bands.json"), "--levels", "3"]) == 0
    document = json.loads((tmp_path / "bands.json").read_text(encoding='utf-8'))
    assert document["levels"] == 3
    assert len(document["band_edges"]["details"]) == 3
    assert set(document["band_energies"]) == {"approx", "detail_1", "detail_2", "detail_3"}
    assert len(document["frames"]) == 384


def test_add_vibrato_and_detect(tmp_path, capsys):
    source, out = tmp_path / "flat.json", tmp_path / "vib.json"
    write_contour(source, flat())
    assert run(["add-vibrato", str(source), "-o", str(out), "--rate", "6", "--extent", "60", "--frames", "50:350"]) == 0
    assert run(["detect", str(out), "--window", "50:350"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["label"] == "vibrato"
    assert record["rate"] == pytest.approx(6.0, abs=0.5)


def test_stats_and_shift_range(tmp_path):
    write_contour(tmp_path / "alto.json", flat(220.0))
    write_contour(tmp_path / "tenor.json", flat(330.0))
    table = tmp_path / "means.json"
    assert run(["stats", str(tmp_path / "alto.json"), str(tmp_path / "tenor.json"), "-o", str(table)]) == 0
    assert json.loads(table.read_text(encoding='utf-8')) == {"alto": 220.0, "tenor": 330.0}

    out = tmp_path / "shifted.json"
    assert run([
        "shift-range", str(tmp_path / "alto.json"), "-o", str(out), "--stats", str(table), "--src", "alto", "--tgt", "tenor"
    ]) == 0
    np.testing.assert_allclose(read_contour(out).f0_hz, 330.0)
    assert run(["shift-range", str(tmp_path / "alto.json"), "-o", str(out), "--tgt-mean", "110"]) == 0
    np.testing.assert_allclose(read_contour(out).f0_hz, 110.0)
    assert run(["shift-range", str(tmp_path / "alto.json"), "-o", str(out), "--stats", str(table), "--tgt", "bass"]) == 1


def test_gen_corpus_and_eval(tmp_path):
    corpus = tmp_path / "corpus"
    assert run(["gen-corpus", str(corpus), "--items", "6", "--seed", "3"]) == 0
    manifest = json.loads((corpus / "manifest.json").read_text(encoding='utf-8'))
    assert len(manifest["items"]) == 6

    report = tmp_path / "report.json"
    assert run([
        "eval", "--corpus", str(corpus), "--alphas", "0.1,1.0", "-o", str(report), "--csv-dir", str(tmp_path / "csv")
    ]) == 0
    result = json.loads(report.read_text(encoding='utf-8'))
    assert set(result) == {"style_accuracy", "per_alpha_accuracy", "level_capture"}
    assert set(result["per_alpha_accuracy"]) == {"0.1", "1.0"}
    assert set(result["level_capture"]) == {str(level) for level in range(1, 7)}
    assert (tmp_path / "csv" / "per_alpha.csv").exists()
    assert (tmp_path / "csv" / "level_capture.csv").exists()


def test_train_and_convert(tmp_path, vibrato_file):
    checkpoint = tmp_path / "converter.json"
    assert run(["train", "-o", str(checkpoint), "--items", "4", "--steps", "5", "--batch", "8"]) == 0
    out = tmp_path / "converted.json"
    assert run(["convert", str(vibrato_file), "-o", str(out), "--checkpoint", str(checkpoint), "--style", "straight"]) == 0
    converted = read_contour(out)
    assert len(converted) == 384
    assert converted.voiced.all()
    assert run(["convert", str(vibrato_file), "-o", str(out), "--checkpoint", str(checkpoint), "--style", "mezzo"]) == 2


def test_synth(tmp_path, vibrato_file):
    out = tmp_path / "demo.wav"
    assert run(["synth", str(vibrato_file), "-o", str(out), "--partials", "4"]) == 0
    buffer = read_wav(out)
    assert buffer.sample_rate == 24000
    assert len(buffer) == 384 * 256
