"""
Command-line entry point.

    python cli.py extract in.wav -o f0.json
    python cli.py scale f0.json -o out.json --factor 0 --frames 100:200:2
    python cli.py eval --corpus corpus/ --alphas 0.1,0.3,0.5,0.7,1.0,2.0

Exit codes: 0 on success, 2 on usage errors, 1 on processing errors.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

import report_data
from generate_demo_audio import synth_demo
from pitchFunctions.config import configure_logging, get_settings
from pitchFunctions.converter_model import (
    STYLES,
    ConverterModel,
    TrainConfig,
    convert_style,
    load_checkpoint,
    save_checkpoint,
    train,
    training_corpus_spec,
)
from pitchFunctions.create_corpus.populate_corpus import CorpusSpec, build_corpus, gen_corpus, load_corpus
from pitchFunctions.errors import PitchStyleError
from pitchFunctions.json_utils import load_json, save_to_json
from pitchFunctions.pitch_tracker import TrackerConfig, extract_f0
from pitchFunctions.signal_io import read_contour, read_wav, write_contour
from pitchFunctions.style_engine import (
    ScalingSpec,
    VibratoParams,
    decompose,
    mean_f0,
    mean_f0_table,
    recompose,
    remove_vibrato,
    shift_pitch_range,
    synth_vibrato,
)
from pitchFunctions.vibrato_analysis import estimate
from pitchFunctions.wavelet import band_edges, band_energies, dwt

logger = logging.getLogger(__name__)


def parse_frame_range(text: str) -> Tuple[int, int, float]:
    """start:end[:factor] with end exclusive; a missing factor means 0"""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(f"expected start:end[:factor], got {text!r}")
    try:
        start, end = int(parts[0]), int(parts[1])
        factor = float(parts[2]) if len(parts) == 3 else 0.0
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:end[:factor], got {text!r}")
    if start < 0 or end <= start:
        raise argparse.ArgumentTypeError(f"range {text!r} must satisfy 0 <= start < end")
    return start, end, factor


def parse_window(text: str) -> Tuple[int, int]:
    start, end, _ = parse_frame_range(text)
    return start, end


def parse_alphas(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _emit_json(data, output: Optional[str]) -> None:
    if output:
        save_to_json(data, output)
        logger.info(f"Wrote {output}")
    else:
        json.dump(data, sys.stdout, indent=2)
        sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_extract(args) -> None:
    buffer = read_wav(args.input)
    config = TrackerConfig.from_settings(
        **{k: v for k, v in {
            "hop": args.hop,
            "f0_floor": args.f0_floor,
            "f0_ceil": args.f0_ceil,
            "voicing_reliability_threshold": args.threshold,
        }.items() if v is not None}
    )
    contour = extract_f0(buffer, config)
    write_contour(args.output, contour)
    logger.info(f"Extracted {len(contour)} frames ({contour.voiced_count} voiced) to {args.output}")


def cmd_decompose(args) -> None:
    contour = read_contour(args.input)
    bands = decompose(contour, args.levels)
    approx_band, detail_bands = band_edges(contour.frame_rate, args.levels)
    frames = pd.DataFrame({
        "frame": np.arange(len(bands)),
        "low": bands.low,
        "high": bands.high,
        "voiced": bands.voiced.astype(int),
    })
    output = Path(args.output)
    if output.suffix.lower() == ".csv":
        with open(output, 'w', encoding='utf-8', newline='\n') as f:
            f.write(f"# frame_rate={contour.frame_rate!r} levels={args.levels}\n")
            frames.to_csv(f, index=False, lineterminator='\n')
    else:
        save_to_json({
            "frame_rate": contour.frame_rate,
            "levels": args.levels,
            "band_edges": {"approx": approx_band, "details": detail_bands},
            "band_energies": band_energies(dwt(bands.low + bands.high, args.levels)),
            "frames": frames.to_dict("records"),
        }, output)
    logger.info(f"Wrote bands to {output}")


def cmd_scale(args) -> None:
    contour = read_contour(args.input)
    if args.frames:
        spec = ScalingSpec.from_ranges(args.factor, args.frames, len(contour))
    else:
        spec = ScalingSpec(global_factor=args.factor)
    write_contour(args.output, recompose(decompose(contour, args.levels), spec))


def cmd_remove_vibrato(args) -> None:
    write_contour(args.output, remove_vibrato(read_contour(args.input), args.levels))


def cmd_add_vibrato(args) -> None:
    contour = read_contour(args.input)
    params = VibratoParams(rate=args.rate, extent=args.extent, onset_delay=args.onset_delay, phase=args.phase)
    write_contour(args.output, synth_vibrato(contour, params, args.frames))


def cmd_shift_range(args) -> None:
    contour = read_contour(args.input)
    src_mean, tgt_mean = args.src_mean, args.tgt_mean
    if args.stats:
        table = load_json(args.stats)
        if args.src:
            src_mean = _lookup(table, args.src)
        if args.tgt:
            tgt_mean = _lookup(table, args.tgt)
    if src_mean is None:
        src_mean = mean_f0(contour)
    if tgt_mean is None:
        raise PitchStyleError("a target mean is required (--tgt-mean, or --stats with --tgt)")
    write_contour(args.output, shift_pitch_range(contour, src_mean, tgt_mean))


def _lookup(table: dict, name: str) -> float:
    if name not in table:
        raise PitchStyleError(f"{name!r} not found in mean F0 table")
    return float(table[name])


def cmd_stats(args) -> None:
    _emit_json(mean_f0_table(args.inputs), args.output)


def cmd_detect(args) -> None:
    contour = read_contour(args.input)
    result = estimate(contour, args.levels, args.window)
    _emit_json(result.to_record(), args.output)


def cmd_convert(args) -> None:
    model = load_checkpoint(args.checkpoint)
    contour = read_contour(args.input)
    write_contour(args.output, convert_style(model, contour, args.style, args.levels))


def cmd_gen_corpus(args) -> None:
    spec = CorpusSpec(
        items=args.items,
        seed=args.seed,
        vibrato_fraction=args.vibrato_fraction,
        phase_locked=args.phase_locked,
        frame_rate=get_settings().frame_rate,
        levels=get_settings().levels,
    )
    gen_corpus(spec, args.out_dir, workers=args.workers or get_settings().workers)


def cmd_train(args) -> None:
    if args.corpus:
        corpus = load_corpus(args.corpus)
    else:
        corpus = build_corpus(training_corpus_spec(
            items=args.items, seed=args.seed, levels=args.levels, frame_rate=get_settings().frame_rate
        ))
    model = ConverterModel.initialize(window=args.window, seed=args.seed)
    config = TrainConfig(
        learning_rate=args.lr, steps=args.steps, batch=args.batch, seed=args.seed, levels=args.levels
    )
    model, _ = train(model, corpus, config)
    save_checkpoint(model, args.output)


def cmd_eval(args) -> None:
    result = report_data.evaluate(args.corpus, args.alphas, args.levels, workers=args.workers or get_settings().workers)
    if args.csv_dir:
        report_data.write_report_csvs(result, args.csv_dir)
    _emit_json(result, args.output)


def cmd_synth(args) -> None:
    synth_demo(read_contour(args.input), args.output, args.partials)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="pitch-style", description="F0 vibrato analysis and style conversion")
    parser.add_argument("--log-level", default=None, help="override PITCH_STYLE_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_levels(p):
        p.add_argument("--levels", type=int, default=settings.levels, help="DWT level L")
        return p

    p = sub.add_parser("extract", help="estimate F0 from a WAV file")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--hop", type=int)
    p.add_argument("--f0-floor", type=float)
    p.add_argument("--f0-ceil", type=float)
    p.add_argument("--threshold", type=float, help="voicing reliability threshold")
    p.set_defaults(func=cmd_extract)

    p = with_levels(sub.add_parser("decompose", help="write the low and high log-F0 bands"))
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decompose)

    p = with_levels(sub.add_parser("scale", help="scale the high band globally or per frame range"))
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--frames", type=parse_frame_range, action="append", metavar="START:END[:FACTOR]")
    p.set_defaults(func=cmd_scale)

    p = with_levels(sub.add_parser("remove-vibrato", help="drop the high band"))
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_remove_vibrato)

    p = sub.add_parser("add-vibrato", help="add sinusoidal vibrato to a voiced frame range")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--extent", type=float, required=True, help="peak deviation in cents")
    p.add_argument("--onset-delay", type=float, default=0.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--frames", type=parse_window, metavar="START:END")
    p.set_defaults(func=cmd_add_vibrato)

    p = sub.add_parser("shift-range", help="move a contour to another mean F0")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--src-mean", type=float)
    p.add_argument("--tgt-mean", type=float)
    p.add_argument("--stats", help="mean F0 table written by 'stats'")
    p.add_argument("--src")
    p.add_argument("--tgt")
    p.set_defaults(func=cmd_shift_range)

    p = sub.add_parser("stats", help="mean F0 per contour file")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_stats)

    p = with_levels(sub.add_parser("detect", help="vibrato rate, extent and label"))
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--window", type=parse_window, metavar="START:END")
    p.set_defaults(func=cmd_detect)

    p = with_levels(sub.add_parser("convert", help="convert to a target style with a trained converter"))
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--style", choices=STYLES, required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("gen-corpus", help="write a synthetic labelled contour corpus")
    p.add_argument("out_dir")
    p.add_argument("--items", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vibrato-fraction", type=float, default=0.5)
    p.add_argument("--phase-locked", action="store_true")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_gen_corpus)

    p = with_levels(sub.add_parser("train", help="train the style converter"))
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--corpus", help="corpus directory; defaults to a generated phase-locked corpus")
    p.add_argument("--items", type=int, default=200)
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = with_levels(sub.add_parser("eval", help="style accuracy, per-alpha accuracy and level sweep"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--alphas", type=parse_alphas, default=list(report_data.DEFAULT_ALPHAS))
    p.add_argument("-o", "--output")
    p.add_argument("--csv-dir")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a contour as audio")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--partials", type=int, default=8)
    p.set_defaults(func=cmd_synth)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except PitchStyleError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    configure_logging(args.log_level)
    try:
        args.func(args)
    except (PitchStyleError, ValidationError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(run())
