"""Increment samplers for Lévy noise given by a characteristic triplet.

Only named samplable jump families are supported: no jumps, compound Poisson
with Gaussian marks, and symmetric alpha-stable jumps either along a fixed
projection or isotropic (sub-Gaussian representation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional, Union

import numpy as np
from loguru import logger
from scipy.stats import levy_stable

from core.errors import DimensionMismatch, InvalidAlpha, MomentOrderInvalid

logger = logger.bind(module="levy_noise")


class StableMode(str, Enum):
    isotropic = "isotropic"
    projected = "projected"


class NoiseFamily(str, Enum):
    brownian = "brownian"
    cpp = "cpp"
    stable = "stable"


@dataclass(frozen=True)
class NoJumps:
    pass


@dataclass(frozen=True)
class CompoundPoisson:
    """Poisson arrivals with Gaussian marks ``N(mean, scale^2 I_k)`` mapped by ``projection``."""

    rate: float
    jump_mean: np.ndarray
    jump_scale: float
    projection: np.ndarray

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError("compound Poisson rate must be >= 0")
        if self.jump_scale < 0:
            raise ValueError("jump scale must be >= 0")


@dataclass(frozen=True)
class AlphaStable:
    """Symmetric alpha-stable jumps with unit-time scale ``scale``.

    ``projection`` is a ``(d,)`` direction in projected mode and unused in
    isotropic mode.
    """

    alpha: float
    scale: float
    mode: StableMode
    projection: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 2.0):
            raise InvalidAlpha(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.scale <= 0:
            raise ValueError("stable scale must be positive")


JumpSpec = Union[NoJumps, CompoundPoisson, AlphaStable]


@dataclass(frozen=True)
class LevyTriplet:
    """Drift ``a``, Gaussian factor ``Sigma^{1/2}`` (``d x k``) and jump family."""

    drift_a: np.ndarray
    sigma_sqrt: np.ndarray
    jump_spec: JumpSpec = field(default_factory=NoJumps)
    p_star: float = math.inf

    def __post_init__(self) -> None:
        a = np.atleast_1d(np.asarray(self.drift_a, dtype=float))
        s = np.asarray(self.sigma_sqrt, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        object.__setattr__(self, "drift_a", a)
        object.__setattr__(self, "sigma_sqrt", s)
        if s.shape[0] != a.shape[0]:
            raise DimensionMismatch(
                f"sigma_sqrt has {s.shape[0]} rows but drift has dimension {a.shape[0]}"
            )
        if self.p_star <= 0:
            raise MomentOrderInvalid("p_star must be positive")
        jump = self.jump_spec
        if isinstance(jump, AlphaStable):
            if jump.alpha < 2.0 and self.p_star >= jump.alpha:
                raise MomentOrderInvalid(
                    f"alpha-stable noise has finite moments only below alpha={jump.alpha}; "
                    f"p_star={self.p_star}"
                )
            if jump.mode is StableMode.projected:
                if jump.projection is None or np.shape(jump.projection) != (self.dim,):
                    raise DimensionMismatch("projected stable noise needs a (d,) projection")
        if isinstance(jump, CompoundPoisson) and jump.projection.shape[0] != self.dim:
            raise DimensionMismatch("compound Poisson projection has the wrong row count")

    @property
    def dim(self) -> int:
        return int(self.drift_a.shape[0])

    @property
    def covariance(self) -> np.ndarray:
        return self.sigma_sqrt @ self.sigma_sqrt.T

    @property
    def is_gaussian(self) -> bool:
        return isinstance(self.jump_spec, NoJumps)

    @property
    def family(self) -> NoiseFamily:
        if isinstance(self.jump_spec, CompoundPoisson):
            return NoiseFamily.cpp
        if isinstance(self.jump_spec, AlphaStable):
            return NoiseFamily.stable
        return NoiseFamily.brownian


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _stable(alpha: float, beta: float, scale: float, size: Any, rng: np.random.Generator) -> np.ndarray:
    return levy_stable.rvs(alpha, beta, loc=0.0, scale=scale, size=size, random_state=rng)


def _stable_jumps(jump: AlphaStable, dt: float, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    step_scale = dt ** (1.0 / jump.alpha)
    if jump.mode is StableMode.projected:
        if jump.alpha == 2.0:
            s = math.sqrt(2.0) * jump.scale * rng.standard_normal(n)
        else:
            s = _stable(jump.alpha, 0.0, jump.scale, n, rng)
        return step_scale * s[:, None] * np.asarray(jump.projection, dtype=float)[None, :]
    gauss = math.sqrt(2.0) * jump.scale * rng.standard_normal((n, d))
    if jump.alpha == 2.0:
        return step_scale * gauss
    sub_scale = math.cos(math.pi * jump.alpha / 4.0) ** (2.0 / jump.alpha)
    mix = _stable(jump.alpha / 2.0, 1.0, sub_scale, n, rng)
    return step_scale * np.sqrt(np.maximum(mix, 0.0))[:, None] * gauss


def sample_increments(
    triplet: LevyTriplet, dt: float, rng: np.random.Generator, n: int
) -> np.ndarray:
    """Draw ``n`` independent increments ``L_{t+dt} - L_t`` as an ``(n, d)`` array.

    The draw order (Gaussian part, then jumps) is fixed so that a stream
    always produces the same increments.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    d = triplet.dim
    k = triplet.sigma_sqrt.shape[1]
    xi = rng.standard_normal((n, k))
    inc = triplet.drift_a[None, :] * dt + math.sqrt(dt) * (xi @ triplet.sigma_sqrt.T)
    jump = triplet.jump_spec
    if isinstance(jump, CompoundPoisson):
        counts = rng.poisson(jump.rate * dt, size=n).astype(float)
        kj = jump.projection.shape[1]
        marks = counts[:, None] * jump.jump_mean[None, :] + jump.jump_scale * np.sqrt(counts)[
            :, None
        ] * rng.standard_normal((n, kj))
        inc = inc + marks @ jump.projection.T
    elif isinstance(jump, AlphaStable):
        inc = inc + _stable_jumps(jump, dt, n, d, rng)
    return inc


def sample_increment(triplet: LevyTriplet, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Single increment as a ``(d,)`` vector."""
    return sample_increments(triplet, dt, rng, 1)[0]


def empirical_moment(samples: Any, p: float) -> float:
    """Mean of ``|x|^p`` over the sample rows."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("samples must be non-empty")
    norms = np.abs(arr) if arr.ndim == 1 else np.linalg.norm(arr, axis=-1)
    return float(np.mean(norms**p))


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _projection(dim: int, projection: Any) -> np.ndarray:
    if projection is None:
        return np.eye(dim)
    proj = np.asarray(projection, dtype=float)
    if proj.ndim == 1:
        proj = proj[:, None]
    if proj.shape[0] != dim:
        raise DimensionMismatch(f"projection has {proj.shape[0]} rows, expected {dim}")
    return proj


def brownian(dim: int, scale: float = 1.0, projection: Any = None, drift: Any = None) -> LevyTriplet:
    """Brownian motion ``scale * P B_t`` (``P`` defaults to the identity)."""
    sig = scale * _projection(dim, projection)
    a = np.zeros(dim) if drift is None else np.asarray(drift, dtype=float)
    return LevyTriplet(drift_a=a, sigma_sqrt=sig, jump_spec=NoJumps(), p_star=math.inf)


def compound_poisson(
    dim: int,
    rate: float,
    jump_mean: Any = 0.0,
    jump_scale: float = 1.0,
    projection: Any = None,
    sigma_scale: float = 0.0,
    p_star: float = math.inf,
) -> LevyTriplet:
    proj = _projection(dim, projection)
    kj = proj.shape[1]
    mean = np.broadcast_to(np.asarray(jump_mean, dtype=float), (kj,)).copy()
    jump = CompoundPoisson(rate=rate, jump_mean=mean, jump_scale=jump_scale, projection=proj)
    return LevyTriplet(
        drift_a=np.zeros(dim),
        sigma_sqrt=sigma_scale * np.eye(dim),
        jump_spec=jump,
        p_star=p_star,
    )


def alpha_stable(
    dim: int,
    alpha: float,
    scale: float = 1.0,
    mode: str | StableMode = StableMode.isotropic,
    projection: Any = None,
    p_star: Optional[float] = None,
) -> LevyTriplet:
    """Pure-jump symmetric stable noise.

    ``p_star`` defaults to ``0.999 * alpha`` (any order below ``alpha``).
    """
    if not (0.0 < alpha <= 2.0):
        raise InvalidAlpha(f"alpha must lie in (0, 2], got {alpha}")
    mode = StableMode(mode)
    proj = None
    if mode is StableMode.projected:
        proj = np.ones(dim) if projection is None else np.ravel(np.asarray(projection, dtype=float))
    if p_star is None:
        p_star = math.inf if alpha == 2.0 else 0.999 * alpha
    jump = AlphaStable(alpha=alpha, scale=scale, mode=mode, projection=proj)
    return LevyTriplet(
        drift_a=np.zeros(dim),
        sigma_sqrt=np.zeros((dim, 1)),
        jump_spec=jump,
        p_star=p_star,
    )


def triplet_from_config(noise: Mapping[str, Any], dim: int) -> LevyTriplet:
    """Build a triplet from a ``{family, params..., projection}`` mapping."""
    family = NoiseFamily(noise.get("family", "brownian"))
    projection = noise.get("projection")
    p_star = noise.get("p_star")
    if family is NoiseFamily.brownian:
        return brownian(dim, scale=float(noise.get("scale", 1.0)), projection=projection)
    if family is NoiseFamily.cpp:
        return compound_poisson(
            dim,
            rate=float(noise.get("rate", 1.0)),
            jump_mean=noise.get("jump_mean", 0.0),
            jump_scale=float(noise.get("jump_scale", 1.0)),
            projection=projection,
            sigma_scale=float(noise.get("scale", 0.0)),
            p_star=math.inf if p_star is None else float(p_star),
        )
    mode = noise.get("mode") or (StableMode.projected if projection is not None else StableMode.isotropic)
    return alpha_stable(
        dim,
        alpha=float(noise.get("alpha", 2.0)),
        scale=float(noise.get("scale", 1.0)),
        mode=mode,
        projection=projection,
        p_star=None if p_star is None else float(p_star),
    )


__all__ = [
    "StableMode",
    "NoiseFamily",
    "NoJumps",
    "CompoundPoisson",
    "AlphaStable",
    "LevyTriplet",
    "sample_increments",
    "sample_increment",
    "empirical_moment",
    "brownian",
    "compound_poisson",
    "alpha_stable",
    "triplet_from_config",
]
