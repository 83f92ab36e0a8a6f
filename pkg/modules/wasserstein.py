"""Wasserstein distances between empirical measures.

The reported value follows the convention ``(inf E|U - V|^p)^(min(1, 1/p))``:
a ``p``-th root for ``p >= 1`` and the raw transport cost for ``p < 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Optional

import numpy as np
from loguru import logger
from scipy.linalg import sqrtm
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from core.errors import DimensionMismatch, SizeCapExceeded, UnequalWeights
from utils.seeding import make_rng

logger = logger.bind(module="wasserstein")

ASSIGNMENT_CAP = 4096
ESTIMATE_CAP = 2048
BOOTSTRAP_REPS = 8
STDERR_FLOOR = 1e-12
WEIGHT_TOL = 1e-12


class WpMethod(str, Enum):
    exact_1d = "exact_1d"
    assignment = "assignment"
    sliced = "sliced"
    auto = "auto"


def outer_exponent(p: float) -> float:
    return min(1.0, 1.0 / p)


class EmpiricalMeasure:
    """Weighted point cloud in ``R^d``; weights default to uniform."""

    __slots__ = ("points", "weights")

    def __init__(self, points: Any, weights: Optional[Any] = None) -> None:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a non-empty (n, d) array")
        if not np.isfinite(pts).all():
            raise ValueError("points must be finite")
        n = pts.shape[0]
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise DimensionMismatch("weights and points differ in length")
            if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
                raise ValueError("weights must be non-negative and sum to 1")
        self.points = pts
        self.weights = w

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(np.abs(self.weights - 1.0 / self.n) <= WEIGHT_TOL))

    def shifted(self, u: Any) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.points + np.asarray(u, dtype=float), self.weights)

    def scaled(self, c: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(c * self.points, self.weights)

    def moment(self, p: float) -> float:
        return float(np.sum(self.weights * np.linalg.norm(self.points, axis=1) ** p))

    def resample(self, rng: np.random.Generator, n: int, replace: bool = True) -> "EmpiricalMeasure":
        idx = rng.choice(self.n, size=n, replace=replace, p=None if self.is_uniform else self.weights)
        return EmpiricalMeasure(self.points[idx])


@dataclass
class WpResult:
    value: float
    p: float
    method: WpMethod
    exponent: float
    upper_bound_only: bool = False
    stderr: Optional[float] = None
    n_used: Optional[int] = None
    reps: int = 1

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "p": self.p,
            "method": self.method.value,
            "exponent_convention": self.exponent,
            "upper_bound_only": self.upper_bound_only,
            "stderr": self.stderr,
            "n_used": self.n_used,
            "reps": self.reps,
        }


def _as_measure(mu: Any) -> EmpiricalMeasure:
    return mu if isinstance(mu, EmpiricalMeasure) else EmpiricalMeasure(mu)


def _check_p(p: float) -> None:
    if not p > 0:
        raise ValueError("p must be positive")


# ---------------------------------------------------------------------------
# Exact solvers
# ---------------------------------------------------------------------------


def _quantile_cost(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, p: float) -> float:
    o1 = np.argsort(mu1.points[:, 0], kind="stable")
    o2 = np.argsort(mu2.points[:, 0], kind="stable")
    x1, c1 = mu1.points[o1, 0], np.cumsum(mu1.weights[o1])
    x2, c2 = mu2.points[o2, 0], np.cumsum(mu2.weights[o2])
    c1[-1] = c2[-1] = 1.0
    cuts = np.unique(np.concatenate([[0.0], c1, c2]))
    cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
    mass = np.diff(cuts)
    mid = 0.5 * (cuts[:-1] + cuts[1:])
    i = np.minimum(np.searchsorted(c1, mid), x1.size - 1)
    j = np.minimum(np.searchsorted(c2, mid), x2.size - 1)
    return float(np.sum(mass * np.abs(x1[i] - x2[j]) ** p))


def wp_exact_1d(mu1: Any, mu2: Any, p: float) -> WpResult:
    """Monotone (quantile) coupling on the line.

    Optimal for ``p >= 1``; for ``p < 1`` the result is an upper bound and is
    flagged as such.
    """
    _check_p(p)
    mu1, mu2 = _as_measure(mu1), _as_measure(mu2)
    if mu1.dim != 1 or mu2.dim != 1:
        raise DimensionMismatch(f"exact 1-d solver needs d=1, got {mu1.dim} and {mu2.dim}")
    cost = _quantile_cost(mu1, mu2, p)
    e = outer_exponent(p)
    return WpResult(
        value=cost**e,
        p=p,
        method=WpMethod.exact_1d,
        exponent=e,
        upper_bound_only=p < 1,
        n_used=max(mu1.n, mu2.n),
    )


def _assignment_costs(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, p: float) -> np.ndarray:
    cost = cdist(mu1.points, mu2.points) ** p
    rows, cols = linear_sum_assignment(cost)
    return cost[rows, cols]


def wp_assignment(mu1: Any, mu2: Any, p: float, cap: int = ASSIGNMENT_CAP) -> WpResult:
    """Exact optimal matching between two uniform clouds of equal size."""
    _check_p(p)
    mu1, mu2 = _as_measure(mu1), _as_measure(mu2)
    if mu1.dim != mu2.dim:
        raise DimensionMismatch(f"clouds live in R^{mu1.dim} and R^{mu2.dim}")
    if mu1.n != mu2.n or not (mu1.is_uniform and mu2.is_uniform):
        raise UnequalWeights(f"assignment needs equal uniform clouds, got n={mu1.n} and n={mu2.n}")
    if mu1.n > cap:
        raise SizeCapExceeded(f"n={mu1.n} exceeds the assignment cap {cap}")
    costs = _assignment_costs(mu1, mu2, p)
    e = outer_exponent(p)
    return WpResult(
        value=float(costs.mean()) ** e, p=p, method=WpMethod.assignment, exponent=e, n_used=mu1.n
    )


def wp_sliced(mu1: Any, mu2: Any, p: float, n_directions: int = 64, seed: int = 0) -> WpResult:
    """Average of exact 1-d distances over random projections.

    Not equal to ``W_p``; a lower bound used for trend curves only.
    """
    if p < 1:
        raise ValueError("sliced estimator needs p >= 1")
    if n_directions < 1:
        raise ValueError("n_directions must be >= 1")
    mu1, mu2 = _as_measure(mu1), _as_measure(mu2)
    if mu1.dim != mu2.dim:
        raise DimensionMismatch(f"clouds live in R^{mu1.dim} and R^{mu2.dim}")
    rng = make_rng(seed, "sliced")
    dirs = rng.standard_normal((n_directions, mu1.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = np.array(
        [
            wp_exact_1d(
                EmpiricalMeasure(mu1.points @ u, mu1.weights),
                EmpiricalMeasure(mu2.points @ u, mu2.weights),
                p,
            ).value
            for u in dirs
        ]
    )
    stderr = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else None
    return WpResult(
        value=float(vals.mean()),
        p=p,
        method=WpMethod.sliced,
        exponent=outer_exponent(p),
        stderr=stderr,
        n_used=max(mu1.n, mu2.n),
        reps=n_directions,
    )


# ---------------------------------------------------------------------------
# Estimator used by experiments
# ---------------------------------------------------------------------------


def _delta_stderr(costs: np.ndarray, p: float) -> float:
    """Standard error of ``mean(costs)^e`` by the delta method."""
    e = outer_exponent(p)
    mean = float(costs.mean())
    if costs.size < 2:
        return STDERR_FLOOR
    se_cost = float(costs.std(ddof=1) / math.sqrt(costs.size))
    if mean <= 0:
        return max(se_cost**e, STDERR_FLOOR)
    return max(e * mean ** (e - 1.0) * se_cost, STDERR_FLOOR)


def wp_estimate(
    mu1: Any,
    mu2: Any,
    p: float,
    method: WpMethod | str = WpMethod.auto,
    cap: int = ESTIMATE_CAP,
    reps: int = BOOTSTRAP_REPS,
    seed: int = 0,
    n_directions: int = 64,
) -> WpResult:
    """Estimate ``W_p`` with a standard error.

    ``auto`` picks the exact 1-d solver for ``d = 1, p >= 1`` (bootstrap
    standard error) and exact assignment otherwise. Clouds of unequal size or
    larger than ``cap`` are subsampled to a common size ``reps`` times and the
    values averaged.
    """
    _check_p(p)
    mu1, mu2 = _as_measure(mu1), _as_measure(mu2)
    if mu1.dim != mu2.dim:
        raise DimensionMismatch(f"clouds live in R^{mu1.dim} and R^{mu2.dim}")
    method = WpMethod(method)
    if method is WpMethod.auto:
        method = WpMethod.exact_1d if (mu1.dim == 1 and p >= 1) else WpMethod.assignment
    rng = make_rng(seed, "bootstrap")

    if method is WpMethod.sliced:
        return wp_sliced(mu1, mu2, p, n_directions=n_directions, seed=seed)

    if method is WpMethod.exact_1d:
        res = wp_exact_1d(mu1, mu2, p)
        n_boot = max(reps, 32)
        boot = np.array(
            [
                wp_exact_1d(mu1.resample(rng, mu1.n), mu2.resample(rng, mu2.n), p).value
                for _ in range(n_boot)
            ]
        )
        res.stderr = max(float(boot.std(ddof=1)), STDERR_FLOOR)
        res.reps = n_boot
        return res

    n = min(mu1.n, mu2.n, cap)
    if mu1.n == mu2.n == n and mu1.is_uniform and mu2.is_uniform:
        costs = _assignment_costs(mu1, mu2, p)
        e = outer_exponent(p)
        return WpResult(
            value=float(costs.mean()) ** e,
            p=p,
            method=WpMethod.assignment,
            exponent=e,
            stderr=_delta_stderr(costs, p),
            n_used=n,
        )
    values, inner = [], []
    for _ in range(max(1, reps)):
        a = mu1.resample(rng, n, replace=not (mu1.is_uniform and n <= mu1.n))
        b = mu2.resample(rng, n, replace=not (mu2.is_uniform and n <= mu2.n))
        costs = _assignment_costs(a, b, p)
        values.append(float(costs.mean()) ** outer_exponent(p))
        inner.append(_delta_stderr(costs, p))
    vals = np.asarray(values)
    spread = float(vals.var(ddof=1)) / vals.size if vals.size > 1 else 0.0
    stderr = math.sqrt(spread + float(np.mean(np.square(inner))))
    return WpResult(
        value=float(vals.mean()),
        p=p,
        method=WpMethod.assignment,
        exponent=outer_exponent(p),
        stderr=max(stderr, STDERR_FLOOR),
        n_used=n,
        reps=vals.size,
    )


def gaussian_w2(m1: Any, s1: Any, m2: Any, s2: Any) -> float:
    """Closed-form ``W_2`` between two Gaussians."""
    m1, m2 = np.atleast_1d(np.asarray(m1, dtype=float)), np.atleast_1d(np.asarray(m2, dtype=float))
    s1, s2 = np.atleast_2d(np.asarray(s1, dtype=float)), np.atleast_2d(np.asarray(s2, dtype=float))
    root2 = np.real(sqrtm(s2))
    cross = np.real(sqrtm(root2 @ s1 @ root2))
    bures = float(np.trace(s1 + s2 - 2.0 * cross))
    return math.sqrt(max(float(np.sum((m1 - m2) ** 2)) + max(bures, 0.0), 0.0))


def read_samples(path: str | Path) -> EmpiricalMeasure:
    """Read a columnar numeric text file (whitespace or comma separated)."""
    path = Path(path)
    first = ""
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.lstrip().startswith("#"):
                first = line
                break
    delimiter = "," if "," in first else None
    data = np.loadtxt(path, delimiter=delimiter, comments="#", ndmin=2)
    logger.debug("read {} samples of dimension {} from {}", data.shape[0], data.shape[1], path)
    return EmpiricalMeasure(data)


__all__ = [
    "WpMethod",
    "EmpiricalMeasure",
    "WpResult",
    "outer_exponent",
    "wp_exact_1d",
    "wp_assignment",
    "wp_sliced",
    "wp_estimate",
    "gaussian_w2",
    "read_samples",
    "ASSIGNMENT_CAP",
    "ESTIMATE_CAP",
]
