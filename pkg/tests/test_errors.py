import pytest

from core.errors import (
    ConfigInvalid,
    CutoffLabError,
    DissipativityViolation,
    InsufficientSignal,
    NonFiniteState,
    NoProfile,
    SizeCapExceeded,
    to_exit_code,
)


def test_default_messages():
    assert str(SizeCapExceeded()) == "size_cap_exceeded"
    assert str(DissipativityViolation("ratio 0.3")) == "ratio 0.3"


def test_nonfinite_state_carries_location():
    exc = NonFiniteState(17, 250, "Y_fw")
    assert exc.trajectory_id == 17
    assert exc.step == 250
    assert "trajectory=17" in str(exc)
    assert "process=Y_fw" in str(exc)


def test_config_invalid_collects_messages():
    exc = ConfigInvalid(["x0: wrong dimension", "schedule.p: too large"])
    assert exc.errors == ["x0: wrong dimension", "schedule.p: too large"]
    assert ConfigInvalid("single").errors == ["single"]


@pytest.mark.parametrize(
    "exc, code",
    [
        (ConfigInvalid("bad"), 2),
        (SizeCapExceeded(), 3),
        (NonFiniteState(0, 1), 3),
        (NoProfile(), 4),
        (InsufficientSignal(), 4),
        (CutoffLabError(), 1),
        (RuntimeError("boom"), 1),
    ],
)
def test_to_exit_code(exc, code):
    assert to_exit_code(exc) == code
