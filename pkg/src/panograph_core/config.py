"""
PanoGraph Configuration

Handles environment variables and process-wide settings. A `.env` file in
the working directory is honoured through python-dotenv.
"""

import logging
import os
from dataclasses import dataclass

from dotenv import find_dotenv, load_dotenv

DEFAULT_WIDTH = 512
LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"


@dataclass
class Config:
    """
    Process configuration container.
    """
    # Upper bound on worker threads for per-cluster work
    THREADS: int = 1
    LOG_LEVEL: str = "WARNING"
    # Equirectangular column count used when a command does not override it
    WIDTH: int = DEFAULT_WIDTH


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        logging.getLogger(__name__).warning("Ignoring non-integer %s=%r", name, raw)
        return default


def load_config() -> Config:
    """
    Load configuration from environment variables (and `.env` if present).
    """
    load_dotenv(find_dotenv(usecwd=True))
    return Config(
        THREADS=max(1, _int_env("PANOGRAPH_THREADS", 1)),
        LOG_LEVEL=os.getenv("PANOGRAPH_LOG_LEVEL", "WARNING").upper(),
        WIDTH=max(1, _int_env("PANOGRAPH_WIDTH", DEFAULT_WIDTH)),
    )


def configure_logging(level: str = "WARNING") -> None:
    """
    Install a single stream handler on the root logger.

    Safe to call repeatedly; later calls only adjust the level.
    """
    root = logging.getLogger()
    if not any(getattr(h, "_panograph", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._panograph = True  # type: ignore[attr-defined]
        root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.WARNING))
