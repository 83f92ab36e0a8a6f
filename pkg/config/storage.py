"""Helpers for loading and saving experiment configuration."""

from __future__ import annotations

import copy
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Mapping

import yaml

from core.errors import ConfigInvalid
from schemas.experiment import ExperimentConfig, parse_experiment

from .constants import CONFIG_DEFAULTS


def _merge(base: dict, override: Mapping[str, Any]) -> dict:
    """Recursive dict merge; ``override`` wins, nested mappings are merged."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _read_config_file(path: str | Path) -> dict:
    """Read a YAML or JSON configuration file from ``path``."""

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    with path.open("r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: top level must be a mapping")
    return data


def resolve(data: Mapping[str, Any]) -> ExperimentConfig:
    """Apply defaults to ``data`` and validate the result."""

    return parse_experiment(_merge(CONFIG_DEFAULTS, data))


def load_experiment(path: str | Path, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    data = _read_config_file(path)
    if overrides:
        data = _merge(data, overrides)
    return resolve(data)


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON of the resolved config."""

    return hashlib.sha256(canonical_json(cfg.model_dump(mode="json")).encode("utf-8")).hexdigest()


def save_experiment(cfg: ExperimentConfig, path: str | Path) -> None:
    """Write ``cfg`` as YAML via a temp file and ``os.replace``."""

    path = Path(path)
    dir_name = path.parent
    dir_name.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=str(dir_name), prefix=".cfg-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            yaml.safe_dump(cfg.model_dump(mode="json"), f, sort_keys=True)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    finally:
        try:
            os.remove(tmp_path)
        except FileNotFoundError:
            pass


__all__ = [
    "resolve",
    "load_experiment",
    "save_experiment",
    "canonical_json",
    "config_hash",
]
