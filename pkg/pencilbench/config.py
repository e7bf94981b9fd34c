"""Settings and Logging Bootstrap

Process-wide settings come from the environment (prefix PENCILBENCH_) or a
.env file; engine-level settings live in per-module dataclass configs.
"""

import logging
import sys
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from pythonjsonlogger import jsonlogger

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class BenchSettings(BaseSettings):
    """Environment-backed settings"""

    model_config = SettingsConfigDict(
        env_prefix="PENCILBENCH_",
        env_file=".env",
        extra="ignore",
    )

    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    threads: Optional[int] = Field(default=None, ge=1)
    log_level: str = "INFO"
    log_json: bool = False


# Global settings instance
_settings: Optional[BenchSettings] = None


def get_settings() -> BenchSettings:
    """Get or create global settings"""
    global _settings
    if _settings is None:
        _settings = BenchSettings()
    return _settings


def reset_settings() -> None:
    """Drop the cached settings so the environment is read again"""
    global _settings
    _settings = None


def configure_logging(level: str = "INFO", json_logs: bool = False) -> None:
    """Route library logs to stderr

    Args:
        level: Logging level name
        json_logs: Emit one JSON object per record instead of text
    """
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level.upper())
    logger.debug(f"Logging configured: level={level.upper()} json={json_logs}")
