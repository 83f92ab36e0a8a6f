from __future__ import annotations

"""Environment settings for the lab.

Only the output directory and the worker count may be overridden from the
environment (``CUTOFF_LAB_OUTPUT_DIR``, ``CUTOFF_LAB_WORKERS``); every other
knob lives in the experiment config file.
"""

import os
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class LabSettings(BaseSettings):
    """Pydantic settings read from ``CUTOFF_LAB_*`` variables."""

    model_config = SettingsConfigDict(env_prefix="CUTOFF_LAB_", extra="ignore")

    output_dir: Optional[str] = None
    workers: int = Field(default_factory=lambda: min(8, os.cpu_count() or 1), ge=1)


_SETTINGS: Optional[LabSettings] = None


def get_settings() -> LabSettings:
    """Return a shared :class:`LabSettings` instance."""

    global _SETTINGS
    if _SETTINGS is None:
        _SETTINGS = LabSettings()
    return _SETTINGS


def reset_settings() -> None:
    """Drop the cached settings so the environment is read again."""

    global _SETTINGS
    _SETTINGS = None


__all__ = ["LabSettings", "get_settings", "reset_settings"]
