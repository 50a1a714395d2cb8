"""
copg-toolkit - Configuration
============================
Reads process configuration from the environment (and a local .env file)
once at import time.

Usage:
    import settings

    settings.configure_logging()
    cap = settings.MAX_SUPPORT_EDGES

Environment:
    COPG_LOG_LEVEL=INFO
    COPG_MAX_SUPPORT_EDGES=64
    COPG_ENUM_MAXLEN_WARN=12
    COPG_WORKERS=1
    COPG_SAMPLES_DIR=./samples
    PORT=5000
    FLASK_DEBUG=false
"""

import os
import sys
import logging
from typing import Optional, TextIO

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def _int_env(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")
    if value < 1:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def _bool_env(name: str, default: bool) -> bool:
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() in ("1", "true", "yes", "on")


# =============================================================================
# SETTINGS
# =============================================================================

LOG_LEVEL = os.environ.get("COPG_LOG_LEVEL", "INFO").upper()
MAX_SUPPORT_EDGES = _int_env("COPG_MAX_SUPPORT_EDGES", 64)
ENUM_MAXLEN_WARN = _int_env("COPG_ENUM_MAXLEN_WARN", 12)
DEFAULT_WORKERS = _int_env("COPG_WORKERS", 1)
SAMPLES_DIR = os.environ.get(
    "COPG_SAMPLES_DIR",
    os.path.join(os.path.dirname(os.path.abspath(__file__)), "samples"),
)
PORT = _int_env("PORT", 5000)
FLASK_DEBUG = _bool_env("FLASK_DEBUG", False)


def configure_logging(level: Optional[str] = None, stream: TextIO = sys.stdout) -> None:
    """
    Install the project-wide log format.

    Args:
        level: Level name; defaults to COPG_LOG_LEVEL.
        stream: Where records go. The CLI passes stderr so stdout stays clean.
    """
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=stream,
        force=True,
    )


def sample_path(name: str) -> str:
    """Absolute path of a bundled sample file."""
    return os.path.join(SAMPLES_DIR, name)
