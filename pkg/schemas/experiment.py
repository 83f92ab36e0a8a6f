"""Pydantic models for experiment configuration files."""

from __future__ import annotations

import math
from enum import Enum
from typing import Any, Dict, List, Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core import events
from core.errors import ConfigInvalid
from utils import logx

SEED_MAX = (1 << 64) - 1


class FieldName(str, Enum):
    """Builtin drifts."""

    fput = "fput"
    linear = "linear"
    oscillator = "oscillator"


class NoiseFamilyName(str, Enum):
    brownian = "brownian"
    cpp = "cpp"
    stable = "stable"


class EstimatorMethod(str, Enum):
    auto = "auto"
    exact_1d = "exact_1d"
    assignment = "assignment"
    sliced = "sliced"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FieldConfig(_Strict):
    """Which drift to build and with what parameters."""

    name: FieldName = FieldName.fput
    dim: Optional[int] = Field(default=None, ge=1)
    params: Dict[str, Any] = Field(default_factory=dict)

    @property
    def dimension(self) -> int:
        if self.name is FieldName.oscillator:
            return 2
        if self.name is FieldName.linear and self.params.get("matrix") is not None:
            return len(self.params["matrix"])
        return self.dim or 1

    def builder_kwargs(self) -> Dict[str, Any]:
        kwargs = dict(self.params)
        if self.name is not FieldName.oscillator:
            kwargs.setdefault("dim", self.dimension)
        return kwargs


class NoiseConfig(_Strict):
    """Levy noise declaration, turned into a triplet by ``triplet_from_config``."""

    family: NoiseFamilyName = NoiseFamilyName.brownian
    scale: Optional[float] = Field(default=None, ge=0)
    alpha: Optional[float] = None
    mode: Optional[str] = None
    rate: Optional[float] = Field(default=None, gt=0)
    jump_mean: Optional[Any] = None
    jump_scale: Optional[float] = Field(default=None, ge=0)
    projection: Optional[Any] = None
    p_star: Optional[float] = Field(default=None, gt=0)

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not (0.0 < v <= 2.0):
            raise ValueError("alpha must lie in (0, 2]")
        return v

    @property
    def effective_p_star(self) -> float:
        if self.p_star is not None:
            return self.p_star
        if self.family is NoiseFamilyName.stable:
            alpha = 2.0 if self.alpha is None else self.alpha
            return math.inf if alpha == 2.0 else 0.999 * alpha
        return math.inf

    def as_mapping(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude_none=True)


class ScheduleConfig(_Strict):
    epsilons: List[float] = Field(default_factory=lambda: [0.1, 0.05, 0.025])
    r_grid: List[float] = Field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0])
    w: float = Field(default=1.0, gt=0)
    p: float = Field(default=2.0, gt=0)

    @field_validator("epsilons")
    @classmethod
    def _decreasing(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one epsilon is required")
        if any(not (0.0 < e < 1.0) for e in v):
            raise ValueError("epsilons must lie in (0, 1)")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        return v

    @field_validator("r_grid")
    @classmethod
    def _non_empty(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("r_grid must be non-empty")
        return v


class EstimatorConfig(_Strict):
    method: EstimatorMethod = EstimatorMethod.auto
    cap: int = Field(default=2048, ge=2, le=4096)
    reps: int = Field(default=8, ge=1)
    n_directions: int = Field(default=64, ge=1)


class ExperimentConfig(_Strict):
    """A complete, resolved experiment description."""

    schema_version: int = 1
    field: FieldConfig = Field(default_factory=FieldConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    x0: List[float] = Field(default_factory=lambda: [1.0])
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    estimator: EstimatorConfig = Field(default_factory=EstimatorConfig)
    n_traj: int = Field(default=2048, ge=2)
    dt: Optional[float] = Field(default=None, gt=0)
    horizon: Optional[float] = Field(default=None, gt=0)
    t_end: float = Field(default=5.0, gt=0)
    time_grid: List[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0])
    invariant_method: str = "ensemble"
    properties_n: int = Field(default=512, ge=8)
    master_seed: int = Field(default=0, ge=0, le=SEED_MAX)
    output_dir: str = "runs/default"

    @field_validator("invariant_method")
    @classmethod
    def _method(cls, v: str) -> str:
        if v not in ("ensemble", "long_run"):
            raise ValueError("invariant_method must be 'ensemble' or 'long_run'")
        return v

    @field_validator("time_grid")
    @classmethod
    def _grid(cls, v: List[float]) -> List[float]:
        if any(t < 0 for t in v):
            raise ValueError("time_grid entries must be >= 0")
        return v

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if len(self.x0) != self.field.dimension:
            raise ValueError(
                f"x0 has dimension {len(self.x0)} but the {self.field.name.value} field has {self.field.dimension}"
            )
        p_star = self.noise.effective_p_star
        if self.schedule.p >= p_star:
            raise ValueError(
                f"p={self.schedule.p} must be below p_star={p_star:.6g}: the driving noise is assumed "
                "to have a finite p*-th moment, so only orders p < p* are defined"
            )
        return self


def _format_error(err: Dict[str, Any]) -> str:
    loc = ".".join(str(p) for p in err.get("loc", ())) or "config"
    msg = str(err.get("msg", "invalid")).removeprefix("Value error, ")
    return f"{loc}: {msg}"


def parse_experiment(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate ``data``; validation failures become :class:`ConfigInvalid`."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        errors = [_format_error(e) for e in exc.errors()]
        logx.warn(events.CONFIG_INVALID, errors=errors)
        logger.debug("config rejected with {} errors", len(errors))
        raise ConfigInvalid(errors) from None


__all__ = [
    "FieldName",
    "NoiseFamilyName",
    "EstimatorMethod",
    "FieldConfig",
    "NoiseConfig",
    "ScheduleConfig",
    "EstimatorConfig",
    "ExperimentConfig",
    "parse_experiment",
]
