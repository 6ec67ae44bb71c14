"""
Exception types shared by the pitch style modules.

Everything derives from ValueError so existing callers that catch
ValueError keep working.
"""


class PitchStyleError(ValueError):
    """Root of all domain errors raised by pitchFunctions"""


class ConfigError(PitchStyleError):
    pass


class WavFormatError(PitchStyleError):
    pass


class WavHeaderError(WavFormatError):
    """RIFF/WAVE header is missing or malformed"""


class UnsupportedWavError(WavFormatError):
    """Well-formed file using a codec, byte order or layout we do not read"""


class TruncatedWavError(WavFormatError):
    """Chunk sizes promise more bytes than the file holds"""


class ContourSchemaError(PitchStyleError):
    pass


class DegenerateContourError(PitchStyleError):
    """Contour too short or without voiced frames for the requested operation"""


class WaveletLevelError(PitchStyleError):
    pass


class DecompositionError(PitchStyleError):
    """Non-finite input, or coefficient lengths that do not match the recorded stages"""


class EmptyCorpusError(PitchStyleError):
    pass


class ScalingError(PitchStyleError):
    pass


class ShapeError(PitchStyleError):
    pass


class TrainingError(PitchStyleError):
    pass


class TrainingDivergedError(TrainingError):
    pass


class CheckpointError(PitchStyleError):
    pass
