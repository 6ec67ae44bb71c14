import logging
from functools import lru_cache
from typing import List, Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ValidationError
from starlette.middleware.cors import CORSMiddleware

from pitchFunctions.config import configure_logging, get_settings
from pitchFunctions.converter_model import ConverterModel, convert_style, load_checkpoint
from pitchFunctions.errors import PitchStyleError
from pitchFunctions.signal_io import ContourFile
from pitchFunctions.style_engine import (
    ScalingSpec,
    VibratoParams,
    decompose,
    mean_f0,
    recompose,
    remove_vibrato,
    shift_pitch_range,
    synth_vibrato,
)
from pitchFunctions.vibrato_analysis import estimate

configure_logging()
logger = logging.getLogger(__name__)

app = FastAPI()
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/")
def read_root():
    """Root endpoint to provide API information"""
    return {
        "app": "Pitch Style API",
        "status": "running",
        "version": "1.0.0",
        "endpoints": [
            "/decompose",
            "/scale",
            "/remove_vibrato",
            "/add_vibrato",
            "/shift_range",
            "/detect",
            "/convert",
        ]
    }


class BandsRequest(BaseModel):
    contour: ContourFile
    levels: int = 4


class FrameRange(BaseModel):
    start: int
    end: int
    factor: float = 0.0


class ScaleRequest(BandsRequest):
    factor: float = 1.0
    frames: List[FrameRange] = []


class AddVibratoRequest(BaseModel):
    contour: ContourFile
    rate: float
    extent: float
    onset_delay: float = 0.0
    phase: float = 0.0
    start: Optional[int] = None
    end: Optional[int] = None


class ShiftRangeRequest(BaseModel):
    contour: ContourFile
    src_mean: Optional[float] = None
    tgt_mean: float


class ConvertRequest(BandsRequest):
    target_style: Literal["straight", "vibrato"]


@lru_cache(maxsize=4)
def _load_converter(path: str) -> ConverterModel:
    logger.info(f"Loading converter checkpoint {path}")
    return load_checkpoint(path)


def _handle(operation: str, func):
    """Run an endpoint body, mapping domain errors to 400 and anything else to 500"""
    try:
        return func()
    except HTTPException:
        raise
    except (PitchStyleError, ValidationError) as e:
        logger.info(f"{operation}: rejected request: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception(f"{operation} failed")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/decompose")
def decompose_contour(request: BandsRequest):
    def body():
        bands = decompose(request.contour.to_contour(), request.levels)
        return {
            "low": bands.low.tolist(),
            "high": bands.high.tolist(),
            "voiced": bands.voiced.tolist(),
            "frame_rate": bands.frame_rate,
            "levels": bands.levels,
        }
    return _handle("decompose", body)


@app.post("/scale")
def scale_vibrato(request: ScaleRequest):
    def body():
        contour = request.contour.to_contour()
        if request.frames:
            spec = ScalingSpec.from_ranges(
                request.factor, [(r.start, r.end, r.factor) for r in request.frames], len(contour)
            )
        else:
            spec = ScalingSpec(global_factor=request.factor)
        return ContourFile.from_contour(recompose(decompose(contour, request.levels), spec))
    return _handle("scale", body)


@app.post("/remove_vibrato")
def remove_contour_vibrato(request: BandsRequest):
    return _handle(
        "remove_vibrato",
        lambda: ContourFile.from_contour(remove_vibrato(request.contour.to_contour(), request.levels)),
    )


@app.post("/add_vibrato")
def add_contour_vibrato(request: AddVibratoRequest):
    def body():
        contour = request.contour.to_contour()
        params = VibratoParams(
            rate=request.rate, extent=request.extent, onset_delay=request.onset_delay, phase=request.phase
        )
        segment = None
        if request.start is not None or request.end is not None:
            segment = (request.start or 0, len(contour) if request.end is None else request.end)
        return ContourFile.from_contour(synth_vibrato(contour, params, segment))
    return _handle("add_vibrato", body)


@app.post("/shift_range")
def shift_contour_range(request: ShiftRangeRequest):
    def body():
        contour = request.contour.to_contour()
        src_mean = request.src_mean if request.src_mean is not None else mean_f0(contour)
        return ContourFile.from_contour(shift_pitch_range(contour, src_mean, request.tgt_mean))
    return _handle("shift_range", body)


@app.post("/detect")
def detect_vibrato(request: BandsRequest):
    return _handle("detect", lambda: estimate(request.contour.to_contour(), request.levels).to_record())


@app.post("/convert")
def convert_contour_style(request: ConvertRequest):
    def body():
        checkpoint = get_settings().converter_checkpoint
        if not checkpoint:
            raise HTTPException(status_code=503, detail="CONVERTER_CHECKPOINT is not configured")
        model = _load_converter(checkpoint)
        converted = convert_style(model, request.contour.to_contour(), request.target_style, request.levels)
        return ContourFile.from_contour(converted)
    return _handle("convert", body)
