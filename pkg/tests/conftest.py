"""Shared pytest fixtures for the cutoff lab."""

# ruff: noqa: E402

import os
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

os.environ.setdefault("DISABLE_FILE_LOGGING", "1")

from core.config import reset_settings
from modules.levy_noise import brownian
from modules.vector_fields import fput_field, linear_field


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    """Every test sees settings read from its own environment."""
    monkeypatch.delenv("CUTOFF_LAB_OUTPUT_DIR", raising=False)
    monkeypatch.setenv("CUTOFF_LAB_WORKERS", "2")
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def fput1():
    return fput_field(1)


@pytest.fixture
def fput2():
    return fput_field(2)


@pytest.fixture
def identity1():
    return linear_field([[1.0]])


@pytest.fixture
def bm1():
    return brownian(1)


@pytest.fixture
def bm2():
    return brownian(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
