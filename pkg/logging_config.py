"""Central Loguru configuration for structured logging of experiment runs."""

from __future__ import annotations

import os
import shutil
import sys
import threading
from pathlib import Path

from loguru import logger

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_PATH = Path(os.getenv("LOG_PATH", "logs/cutoff_lab.log"))
LOG_ROTATION = os.getenv("LOG_ROTATION", "10 MB")
LOG_RETENTION = os.getenv("LOG_RETENTION", "7 days")
# Bytes required to enable file logging (default 50 MB)
MIN_FREE_SPACE = 50 * 1024 * 1024
# Set to a truthy value to disable file logging entirely
DISABLE_FILE_LOGGING = os.getenv("DISABLE_FILE_LOGGING", "").lower() in {
    "1",
    "true",
    "yes",
}

_lock = threading.Lock()
_sink_ids: list[int] = []


def _configure(level: str = LOG_LEVEL, log_path: Path | None = None) -> None:
    """Configure Loguru sinks with structured JSON output.

    Console output goes to stderr so that subcommands printing results on
    stdout stay machine readable.
    """
    global _sink_ids
    path = log_path or LOG_PATH
    with _lock:
        logger.remove()
        _sink_ids = [
            logger.add(
                sys.stderr,
                level=level,
                enqueue=True,
                serialize=True,
            )
        ]

    if DISABLE_FILE_LOGGING:
        logger.debug("File logging disabled via DISABLE_FILE_LOGGING environment variable")
        return

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        free_space = shutil.disk_usage(path.parent).free
    except OSError as exc:
        logger.warning("Cannot prepare log directory {}: {}", path.parent, exc)
        return
    if free_space < MIN_FREE_SPACE:
        logger.warning(
            "Insufficient disk space for {}; skipping file logging ({:.2f} MB free)",
            path,
            free_space / (1024 * 1024),
        )
        return

    with _lock:
        _sink_ids.append(
            logger.add(
                path,
                rotation=LOG_ROTATION,
                retention=LOG_RETENTION,
                level=level,
                enqueue=True,
                serialize=True,
            )
        )


def setup_json_logger(level: str = LOG_LEVEL, log_path: Path | None = None) -> None:
    """Initialise structured logging sinks."""
    _configure(level, log_path)
