"""Exception hierarchy shared by the simulation, estimation and CLI layers."""

from __future__ import annotations


class CutoffLabError(Exception):
    """Base class for every error raised by the laboratory."""

    def __init__(self, message: str = "cutoff_lab_error") -> None:
        super().__init__(message)


class FieldInvalid(CutoffLabError):
    """Raised when a drift violates ``b(0) = 0`` or has inconsistent shapes."""

    def __init__(self, message: str = "field_invalid") -> None:
        super().__init__(message)


class DissipativityViolation(CutoffLabError):
    """Raised when the one-sided monotonicity bound fails on sampled points."""

    def __init__(self, message: str = "dissipativity_violation") -> None:
        super().__init__(message)


class DegenerateInput(CutoffLabError):
    """Raised when sampling keeps producing coincident points."""

    def __init__(self, message: str = "degenerate_input") -> None:
        super().__init__(message)


class EigenvalueInStability(CutoffLabError):
    """Raised when ``Db(0)`` has an eigenvalue with non-positive real part."""

    def __init__(self, message: str = "eigenvalue_in_stability") -> None:
        super().__init__(message)


class DefectiveAmbiguity(CutoffLabError):
    """Raised when a Jordan rank decision falls inside the tolerance band."""

    def __init__(self, message: str = "defective_ambiguity") -> None:
        super().__init__(message)


class FlowDidNotEnter(CutoffLabError):
    """Raised when the deterministic flow misses the ball of radius ``R0/2``."""

    def __init__(self, message: str = "flow_did_not_enter") -> None:
        super().__init__(message)


class InvalidAlpha(CutoffLabError):
    """Raised for a stability index outside ``(0, 2]``."""

    def __init__(self, message: str = "invalid_alpha") -> None:
        super().__init__(message)


class MomentOrderInvalid(CutoffLabError):
    """Raised when a moment order is not covered by the noise's ``p_star``."""

    def __init__(self, message: str = "moment_order_invalid") -> None:
        super().__init__(message)


class StepSizeTooLarge(CutoffLabError):
    """Raised when the time step breaks the stability guard or the contraction check."""

    def __init__(self, message: str = "step_size_too_large") -> None:
        super().__init__(message)


class NonFiniteState(CutoffLabError):
    """Raised when a trajectory produces NaN or Inf."""

    def __init__(self, trajectory_id: int, step: int, process: str = "X_eps") -> None:
        self.trajectory_id = trajectory_id
        self.step = step
        self.process = process
        super().__init__(
            f"non_finite_state: process={process} trajectory={trajectory_id} step={step}"
        )


class DimensionMismatch(CutoffLabError):
    """Raised when inputs live in incompatible dimensions."""

    def __init__(self, message: str = "dimension_mismatch") -> None:
        super().__init__(message)


class SizeCapExceeded(CutoffLabError):
    """Raised when an exact assignment would exceed the configured size cap."""

    def __init__(self, message: str = "size_cap_exceeded") -> None:
        super().__init__(message)


class UnequalWeights(CutoffLabError):
    """Raised when the assignment solver receives non-uniform or unequal clouds."""

    def __init__(self, message: str = "unequal_weights") -> None:
        super().__init__(message)


class NoProfile(CutoffLabError):
    """Raised when a profile is requested but only window cutoff holds."""

    def __init__(self, message: str = "no_profile") -> None:
        super().__init__(message)


class InsufficientSignal(CutoffLabError):
    """Raised when a curve has too few points above the noise floor to fit."""

    def __init__(self, message: str = "insufficient_signal") -> None:
        super().__init__(message)


class ConfigInvalid(CutoffLabError):
    """Raised when an experiment configuration fails validation.

    ``errors`` holds one human readable message per offending field.
    """

    def __init__(self, errors: list[str] | str) -> None:
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("config_invalid: " + "; ".join(self.errors))


_NUMERICAL = (
    FieldInvalid,
    DissipativityViolation,
    DegenerateInput,
    EigenvalueInStability,
    DefectiveAmbiguity,
    FlowDidNotEnter,
    InvalidAlpha,
    MomentOrderInvalid,
    StepSizeTooLarge,
    NonFiniteState,
    DimensionMismatch,
    SizeCapExceeded,
    UnequalWeights,
)


def to_exit_code(exc: BaseException) -> int:
    """Convert known exceptions to a CLI exit status.

    Returns
    -------
    int
        ``2`` for invalid configuration, ``3`` for numerical precondition
        failures, ``4`` for verdict or signal failures and ``1`` otherwise.
    """
    if isinstance(exc, ConfigInvalid):
        return 2
    if isinstance(exc, _NUMERICAL):
        return 3
    if isinstance(exc, (NoProfile, InsufficientSignal)):
        return 4
    return 1


__all__ = [
    "CutoffLabError",
    "FieldInvalid",
    "DissipativityViolation",
    "DegenerateInput",
    "EigenvalueInStability",
    "DefectiveAmbiguity",
    "FlowDidNotEnter",
    "InvalidAlpha",
    "MomentOrderInvalid",
    "StepSizeTooLarge",
    "NonFiniteState",
    "DimensionMismatch",
    "SizeCapExceeded",
    "UnequalWeights",
    "NoProfile",
    "InsufficientSignal",
    "ConfigInvalid",
    "to_exit_code",
]
