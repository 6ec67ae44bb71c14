import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError, field_validator

from pitchFunctions.errors import ConfigError

load_dotenv()

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


class Settings(BaseModel):
    """Process-wide defaults read from the environment (or a .env file)"""

    sample_rate: int = 24000
    hop: int = 256
    levels: int = 4
    log_level: str = "INFO"
    workers: int = 1
    converter_checkpoint: Optional[str] = None

    @field_validator("sample_rate", "hop", "levels", "workers")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be a positive integer")
        return value

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if not isinstance(logging.getLevelName(value), int):
            raise ValueError(f"unknown log level {value}")
        return value

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop


def get_settings() -> Settings:
    """
    Build Settings from PITCH_STYLE_* environment variables.

    Returns:
        Settings: validated settings

    Raises:
        ConfigError: when a variable is present but invalid
    """
    raw = {
        "sample_rate": os.getenv("PITCH_STYLE_SAMPLE_RATE", "24000"),
        "hop": os.getenv("PITCH_STYLE_HOP", "256"),
        "levels": os.getenv("PITCH_STYLE_LEVELS", "4"),
        "log_level": os.getenv("PITCH_STYLE_LOG_LEVEL", "INFO"),
        "workers": os.getenv("PITCH_STYLE_WORKERS", "1"),
        "converter_checkpoint": os.getenv("CONVERTER_CHECKPOINT") or None,
    }
    try:
        return Settings(**raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid environment configuration: {e}") from e


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging the same way for every entry point"""
    logging.basicConfig(level=(level or get_settings().log_level).upper(), format=LOG_FORMAT)
