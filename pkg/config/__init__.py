"""Experiment configuration package."""

from .constants import ARTIFACT_VERSION, CONFIG_DEFAULTS, SCHEMA_VERSION, SUBCOMMANDS
from .storage import canonical_json, config_hash, load_experiment, resolve, save_experiment

__all__ = [
    "load_experiment",
    "save_experiment",
    "resolve",
    "canonical_json",
    "config_hash",
    # re-exported constants
    "ARTIFACT_VERSION",
    "CONFIG_DEFAULTS",
    "SCHEMA_VERSION",
    "SUBCOMMANDS",
]
