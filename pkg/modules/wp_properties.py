"""Numerical checks of the structural properties of ``W_p`` on samples.

Every check runs on exact optimal transport (assignment or permutation
enumeration), so a failure points at a solver or convention bug rather than
at estimator noise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from modules.wasserstein import (
    ASSIGNMENT_CAP,
    EmpiricalMeasure,
    outer_exponent,
    wp_assignment,
    wp_exact_1d,
)
from utils.seeding import make_rng

logger = logger.bind(module="wp_properties")

BRUTE_FORCE_MAX_N = 7
EXACT_TOL = 1e-12
TRIANGLE_TOL = 1e-9


def cloud_scale(mu: EmpiricalMeasure) -> float:
    """Root mean squared distance to the barycenter."""
    centre = mu.weights @ mu.points
    return float(math.sqrt(mu.weights @ np.sum((mu.points - centre) ** 2, axis=1)))


def sampling_tol(n: int, scale: float, p: float = 1.0) -> float:
    return 6.0 / math.sqrt(n) * scale ** min(1.0, p)


@dataclass
class PropertyCheck:
    name: str
    lhs: float
    rhs: float
    tol: float
    passed: bool
    p: Optional[float] = None
    law: Optional[str] = None
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


@dataclass
class PropertySuiteReport:
    n: int
    seed: int
    checks: List[PropertyCheck]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[PropertyCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "n_checks": len(self.checks),
            "all_pass": self.all_passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def _subsample(mu: EmpiricalMeasure, cap: int, seed: int) -> EmpiricalMeasure:
    if mu.n <= cap:
        return mu
    return mu.resample(make_rng(seed, "properties", 1), cap, replace=False)


def verify_shift_linearity(
    mu: Any, u: Any, p: float, cap: int = ASSIGNMENT_CAP, seed: int = 0
) -> PropertyCheck:
    """Compare ``W_p(u + U, U)`` against ``|u|`` (p >= 1) or its band (p < 1)."""
    mu = _subsample(mu if isinstance(mu, EmpiricalMeasure) else EmpiricalMeasure(mu), cap, seed)
    u = np.asarray(u, dtype=float).reshape(-1)
    lhs = wp_assignment(mu.shifted(u), mu, p, cap=cap).value
    norm_u = float(np.linalg.norm(u))
    tol = sampling_tol(mu.n, cloud_scale(mu), p)
    if p >= 1:
        passed = abs(lhs - norm_u) <= tol
        return PropertyCheck("shift_linearity", lhs, norm_u, tol, passed, p=p)
    upper = norm_u**p
    lower = max(upper - 2.0 * mu.moment(p), 0.0)
    passed = lower - tol <= lhs <= upper + tol
    return PropertyCheck(
        "shift_linearity_band",
        lhs,
        upper,
        tol,
        passed,
        p=p,
        detail={"lower": lower, "upper": upper},
    )


def verify_translation_homogeneity(
    mu1: Any, mu2: Any, u1: Any, u2: Any, c: float, p: float, cap: int = ASSIGNMENT_CAP
) -> Dict[str, PropertyCheck]:
    mu1 = mu1 if isinstance(mu1, EmpiricalMeasure) else EmpiricalMeasure(mu1)
    mu2 = mu2 if isinstance(mu2, EmpiricalMeasure) else EmpiricalMeasure(mu2)
    u1 = np.asarray(u1, dtype=float).reshape(-1)
    u2 = np.asarray(u2, dtype=float).reshape(-1)

    both = wp_assignment(mu1.shifted(u1), mu2.shifted(u2), p, cap=cap).value
    relative = wp_assignment(mu1.shifted(u1 - u2), mu2, p, cap=cap).value
    scale = max(1.0, abs(both))
    translation = PropertyCheck(
        "translation_invariance", both, relative, 1e-9 * scale, abs(both - relative) <= 1e-9 * scale, p=p
    )

    base = wp_assignment(mu1, mu2, p, cap=cap).value
    factor = abs(c) if p >= 1 else abs(c) ** p
    scaled = wp_assignment(mu1.scaled(c), mu2.scaled(c), p, cap=cap).value
    expected = factor * base
    tol = 1e-9 * max(1.0, abs(expected))
    homogeneity = PropertyCheck(
        "homogeneity",
        scaled,
        expected,
        tol,
        abs(scaled - expected) <= tol,
        p=p,
        detail={"c": c, "factor": factor},
    )
    return {"translation": translation, "homogeneity": homogeneity}


def brute_force_wp(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, p: float) -> float:
    """Optimal value by enumerating all ``n!`` matchings."""
    n = mu1.n
    if n != mu2.n or n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force needs equal sizes up to {BRUTE_FORCE_MAX_N}")
    cost = cdist(mu1.points, mu2.points) ** p
    perms = np.array(list(itertools.permutations(range(n))))
    totals = cost[np.arange(n), perms].sum(axis=1)
    return float(totals.min() / n) ** outer_exponent(p)


def exactness_check(
    n_instances: int = 100, p_list: Sequence[float] = (0.5, 1.0, 2.0), seed: int = 0
) -> List[PropertyCheck]:
    rng = make_rng(seed, "properties", 2)
    checks = []
    for k in range(n_instances):
        n = int(rng.integers(2, BRUTE_FORCE_MAX_N + 1))
        d = int(rng.integers(1, 4))
        a = EmpiricalMeasure(rng.standard_normal((n, d)))
        b = EmpiricalMeasure(rng.standard_normal((n, d)) + rng.uniform(-1, 1, d))
        for p in p_list:
            fast = wp_assignment(a, b, p).value
            slow = brute_force_wp(a, b, p)
            checks.append(
                PropertyCheck(
                    "assignment_exactness",
                    fast,
                    slow,
                    EXACT_TOL,
                    abs(fast - slow) <= EXACT_TOL,
                    p=p,
                    detail={"instance": k, "n": n, "d": d},
                )
            )
    return checks


def metric_checks(
    n: int = 64, n_triples: int = 20, p_list: Sequence[float] = (1.0, 2.0), seed: int = 0
) -> List[PropertyCheck]:
    """Symmetry and triangle inequality on random triples of clouds."""
    rng = make_rng(seed, "properties", 3)
    checks = []
    for k in range(n_triples):
        d = int(rng.integers(1, 3))
        a, b, c = (
            EmpiricalMeasure(rng.standard_normal((n, d)) * s + m)
            for s, m in zip(rng.uniform(0.5, 2.0, 3), rng.uniform(-2, 2, 3))
        )
        for p in p_list:
            ab = wp_assignment(a, b, p).value
            ba = wp_assignment(b, a, p).value
            bc = wp_assignment(b, c, p).value
            ac = wp_assignment(a, c, p).value
            checks.append(
                PropertyCheck("symmetry", ab, ba, EXACT_TOL, abs(ab - ba) <= EXACT_TOL, p=p, detail={"triple": k})
            )
            checks.append(
                PropertyCheck(
                    "triangle", ac, ab + bc, TRIANGLE_TOL, ac <= ab + bc + TRIANGLE_TOL, p=p, detail={"triple": k}
                )
            )
    return checks


def moment_convergence(
    law: str = "gaussian",
    p: float = 2.0,
    sizes: Sequence[int] = (100, 1000, 10000),
    seed: int = 0,
) -> List[Dict[str, float]]:
    """Two same-law samples at growing ``n``: distance and moment gap per size.

    One-dimensional laws only; both columns should trend to zero.
    """
    rows = []
    for i, n in enumerate(sizes):
        rng = make_rng(seed, "properties", 100 + i)
        a = EmpiricalMeasure(SAMPLE_LAWS[law](rng, n, 1))
        b = EmpiricalMeasure(SAMPLE_LAWS[law](rng, n, 1))
        rows.append(
            {
                "n": n,
                "wp": wp_exact_1d(a, b, p).value,
                "moment_gap": abs(a.moment(p) - b.moment(p)),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Builtin sample laws
# ---------------------------------------------------------------------------

LawSampler = Callable[[np.random.Generator, int, int], np.ndarray]


def _gaussian(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return rng.standard_normal((n, d))


def _uniform(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, (n, d))


def _exponential(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return rng.exponential(1.0, (n, d))


def _student(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return rng.standard_t(5.0, (n, d))


def _mixture(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)[:, None]
    return 2.0 * sign + 0.5 * rng.standard_normal((n, d))


SAMPLE_LAWS: Dict[str, LawSampler] = {
    "gaussian": _gaussian,
    "uniform": _uniform,
    "exponential": _exponential,
    "student_t5": _student,
    "mixture": _mixture,
}

LAW_DIMS: Dict[str, int] = {
    "gaussian": 2,
    "uniform": 2,
    "exponential": 1,
    "student_t5": 2,
    "mixture": 1,
}

SHIFTS: Dict[int, List[List[float]]] = {
    1: [[0.0], [1.0], [-2.5], [0.1], [7.0]],
    2: [[0.0, 0.0], [3.0, 4.0], [1.0, 0.0], [-0.5, 0.25], [0.1, -0.2]],
}


def property_suite(
    n: int = 512,
    seed: int = 0,
    p_list: Sequence[float] = (0.5, 1.0, 2.0),
    n_exactness: int = 100,
) -> PropertySuiteReport:
    """Run every builtin property check and collect the outcomes."""
    checks: List[PropertyCheck] = []
    for i, (law, sampler) in enumerate(SAMPLE_LAWS.items()):
        d = LAW_DIMS[law]
        mu = EmpiricalMeasure(sampler(make_rng(seed, "properties", 10 + i), n, d))
        nu = EmpiricalMeasure(sampler(make_rng(seed, "properties", 20 + i), n, d))
        for p in p_list:
            for u in SHIFTS[d]:
                check = verify_shift_linearity(mu, u, p, seed=seed)
                check.law = law
                check.detail["u"] = u
                checks.append(check)
            for c in (1.0, -2.0, 3.0):
                pair = verify_translation_homogeneity(mu, nu, SHIFTS[d][1], SHIFTS[d][2], c, p)
                for check in pair.values():
                    check.law = law
                    checks.append(check)
    checks.extend(metric_checks(seed=seed))
    checks.extend(exactness_check(n_instances=n_exactness, p_list=p_list, seed=seed))
    report = PropertySuiteReport(n=n, seed=seed, checks=checks)
    logger.info(
        "property suite: {} checks, {} failures", len(checks), len(report.failures())
    )
    return report


__all__ = [
    "PropertyCheck",
    "PropertySuiteReport",
    "SAMPLE_LAWS",
    "cloud_scale",
    "sampling_tol",
    "verify_shift_linearity",
    "verify_translation_homogeneity",
    "brute_force_wp",
    "exactness_check",
    "metric_checks",
    "moment_convergence",
    "property_suite",
]
