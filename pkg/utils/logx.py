"""Lightweight structured logging helpers used across the lab.

Provides convenience wrappers around :mod:`loguru` so simulation and
experiment code can emit structured events with a stable set of fields.
"""

from __future__ import annotations

import json
import time
from typing import Any, Dict

import numpy as np
from loguru import logger

from core.events import ALL_EVENTS

# last emission time per throttling key
_last_times: Dict[str, float] = {}


# required field map for known events
_REQUIRED: dict[str, list[str]] = {
    "sim_start": ["process", "n_traj", "n_steps", "dt"],
    "sim_done": ["process", "n_traj", "n_steps"],
    "sim_progress": ["block", "n_blocks"],
    "nonfinite_state": ["process", "trajectory_id", "step"],
    "curve_point": ["epsilon", "r", "value"],
    "curve_point_skipped": ["epsilon", "r", "t"],
    "run_start": ["subcommand", "config_hash"],
    "run_done": ["subcommand", "exit_code"],
    "artifact_written": ["path", "sha256"],
}


def _validate(event: str, fields: Dict[str, Any]) -> None:
    if event not in ALL_EVENTS:
        raise KeyError(f"unknown event {event!r}")
    required = _REQUIRED.get(event)
    if not required:
        return
    missing = [k for k in required if k not in fields]
    if missing:
        raise KeyError(f"missing fields for {event}: {', '.join(missing)}")


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def _log(level: str, event: str, **fields: Any) -> None:
    """Internal helper to emit a structured log line."""

    _validate(event, fields)
    payload: Dict[str, Any] = {
        "ts": time.time(),
        "level": level,
        "event": event,
        **{k: _jsonable(v) for k, v in fields.items()},
    }
    logger.log(level.upper(), json.dumps(payload, default=str))


def event(event: str, **fields: Any) -> None:
    """Log an informational *event* with structured *fields*."""

    _log("info", event, **fields)


def warn(event: str, **fields: Any) -> None:
    """Log a warning *event*."""

    _log("warning", event, **fields)


def error(event: str, **fields: Any) -> None:
    """Log an error *event*."""

    _log("error", event, **fields)


def debug(event: str, **fields: Any) -> None:
    """Log a debug *event*."""

    _log("debug", event, **fields)


def every(seconds: float, key: str) -> bool:
    """Return ``True`` if ``seconds`` elapsed since last call with *key*.

    Used to rate-limit per-block progress logs in long simulations.
    """

    now = time.time()
    last = _last_times.get(key, 0)
    if now - last >= seconds:
        _last_times[key] = now
        return True
    return False


__all__ = [
    "event",
    "warn",
    "error",
    "debug",
    "every",
]
