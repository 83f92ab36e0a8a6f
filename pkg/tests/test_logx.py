"""Purpose: verify logx helpers emit structured events and utilities."""

import json
import types

import numpy as np
import pytest
from loguru import logger

from core import events
from utils import logx


@pytest.fixture
def captured():
    lines = []
    sink = logger.add(lambda m: lines.append(m.record), level="DEBUG")
    yield lines
    logger.remove(sink)


def test_event_payload_is_json(captured):
    logx.event(events.SIM_START, process="X_eps", n_traj=np.int64(8), n_steps=100, dt=0.01)
    payload = json.loads(captured[-1]["message"])
    assert payload["event"] == "sim_start"
    assert payload["n_traj"] == 8
    assert payload["level"] == "info"
    assert captured[-1]["level"].name == "INFO"


def test_missing_required_field_raises():
    with pytest.raises(KeyError, match="n_steps"):
        logx.event(events.SIM_DONE, process="X_eps", n_traj=1)


def test_warn_and_error_levels(captured):
    logx.warn(events.CURVE_POINT_SKIPPED, epsilon=0.1, r=-5.0, t=-2.7)
    logx.error(events.NONFINITE_STATE, process="X_eps", trajectory_id=3, step=9)
    assert [r["level"].name for r in captured[-2:]] == ["WARNING", "ERROR"]


def test_every_throttles_per_key(monkeypatch):
    logx._last_times.clear()
    t = {"now": 10.0}
    monkeypatch.setattr(logx, "time", types.SimpleNamespace(time=lambda: t["now"]))
    assert logx.every(5, "k")
    assert not logx.every(5, "k")
    assert logx.every(5, "other")
    t["now"] = 16
    assert logx.every(5, "k")


def test_progress_event_requires_block_fields():
    with pytest.raises(KeyError, match="n_blocks"):
        logx.debug(events.SIM_PROGRESS, block=0)


def test_unknown_event_is_rejected(captured):
    with pytest.raises(KeyError, match="sim_strat"):
        logx.event("sim_strat", process="X_eps", n_traj=1, n_steps=1, dt=0.1)
    assert captured == []


def test_every_event_constant_is_registered():
    names = {v for k, v in vars(events).items() if k.isupper() and isinstance(v, str)}
    assert names == events.ALL_EVENTS
    assert set(logx._REQUIRED) <= events.ALL_EVENTS
