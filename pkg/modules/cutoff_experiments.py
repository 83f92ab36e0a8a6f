"""Cutoff experiments over noise levels and window offsets.

The headline quantity is the normalized distance to equilibrium

    ratio(eps, r) = W_p(Law(X^eps_t(x)), mu^eps) / eps^min(1, p),   t = t_eps + r w,

with ``t_eps`` from :func:`modules.spectral.cutoff_time`. Everything else in
this module either produces the ingredients (invariant clouds, OU clouds),
a reference value (Gaussian oracle, theoretical profile) or a diagnostic
over a finished curve.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from core import events
from core.errors import InsufficientSignal, MomentOrderInvalid, NoProfile
from modules.levy_noise import LevyTriplet
from modules.sde_sim import (
    ProcessTag,
    coupled_difference,
    ou_gaussian_law,
    simulate,
    stationary_covariance,
)
from modules.spectral import (
    CutoffParams,
    ProfileVerdict,
    cutoff_time,
    kappa,
    profile_verdict,
)
from modules.vector_fields import VectorFieldSpec
from modules.wasserstein import EmpiricalMeasure, WpResult, gaussian_w2, outer_exponent, wp_estimate
from utils import logx
from utils.seeding import derive_seed
from workers.pool import WorkerPool

logger = logger.bind(module="cutoff_experiments")

INVARIANT_HORIZON_FACTOR = 20.0
# long-run samples are spaced 2/delta apart
INVARIANT_THIN_FACTOR = 2.0
SIGMA_FACTOR = 3.0


class InvariantMethod(str, Enum):
    ensemble = "ensemble"
    long_run = "long_run"


@dataclass
class CutoffSchedule:
    """Noise levels, window offsets, window size and Wasserstein order."""

    epsilons: List[float]
    r_grid: List[float]
    w: float = 1.0
    p: float = 2.0

    def __post_init__(self) -> None:
        self.epsilons = [float(e) for e in self.epsilons]
        self.r_grid = [float(r) for r in self.r_grid]
        if not self.epsilons:
            raise ValueError("epsilons must be non-empty")
        if any(not (0.0 < e < 1.0) for e in self.epsilons):
            raise ValueError("epsilons must lie in (0, 1)")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if not self.r_grid:
            raise ValueError("r_grid must be non-empty")
        if self.w <= 0:
            raise ValueError("w must be positive")
        if self.p <= 0:
            raise ValueError("p must be positive")

    def check_noise(self, triplet: LevyTriplet) -> None:
        if self.p >= triplet.p_star:
            raise MomentOrderInvalid(
                f"p={self.p} needs a finite p-th moment of the noise, which holds only for p < {triplet.p_star}"
            )

    def cutoff_times(self, q: float, ell: int) -> List[float]:
        return [cutoff_time(q, ell, e) for e in self.epsilons]


@dataclass
class CurveEntry:
    epsilon: float
    r: float
    t: float
    wp_ratio: float
    stderr: float
    theory: Optional[float] = None


@dataclass
class CutoffCurve:
    entries: List[CurveEntry]
    p: float
    w: float
    theory: List[Dict[str, float]] = field(default_factory=list)
    verdict: Optional[ProfileVerdict] = None

    @property
    def epsilons(self) -> List[float]:
        return sorted({e.epsilon for e in self.entries}, reverse=True)

    def at(self, epsilon: float) -> List[CurveEntry]:
        return sorted((e for e in self.entries if e.epsilon == epsilon), key=lambda e: e.r)

    def theory_at(self, r: float) -> Optional[float]:
        for row in self.theory:
            if abs(row["r"] - r) < 1e-12:
                return row["profile"]
        return None

    def rows(self) -> List[Dict[str, Any]]:
        return [asdict(e) for e in self.entries]


def ratio_scale(epsilon: float, p: float) -> float:
    return epsilon ** min(1.0, p)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def gaussian_ou_ratio(
    A: Any, sigma_sqrt: Any, x0: Any, epsilon: float, t: float
) -> float:
    """Exact ``W_2(X^eps_t, mu^eps) / eps`` for a linear drift with Brownian noise."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    mean, cov = ou_gaussian_law(A, sigma_sqrt, x0, epsilon, t)
    s_inf = epsilon**2 * stationary_covariance(A, sigma_sqrt)
    return gaussian_w2(mean, cov, np.zeros_like(mean), s_inf) / epsilon


# ---------------------------------------------------------------------------
# Equilibrium clouds
# ---------------------------------------------------------------------------


def estimate_invariant_measure(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    epsilon: float,
    method: InvariantMethod | str = InvariantMethod.ensemble,
    n: int = 4096,
    horizon: Optional[float] = None,
    seed: int = 0,
    dt: Optional[float] = None,
    workers: Optional[int] = None,
    index: int = 0,
) -> EmpiricalMeasure:
    """Sample ``mu^eps`` from ensemble endpoints or one long run thinned every ``2/delta``.

    ``index`` separates independent clouds drawn under the same seed.
    """
    method = InvariantMethod(method)
    floor = INVARIANT_HORIZON_FACTOR / field.delta
    horizon = floor if horizon is None else float(horizon)
    if horizon < floor * (1 - 1e-12):
        raise ValueError(f"horizon {horizon:.4g} is shorter than 20/delta={floor:.4g}")
    child = derive_seed(seed, "invariant", index)
    x0 = np.zeros(field.dim)
    if method is InvariantMethod.ensemble:
        res = simulate(field, triplet, x0, epsilon, horizon, n, child, dt=dt, workers=workers)
        states = res.final(ProcessTag.X_eps).states
    else:
        thin = INVARIANT_THIN_FACTOR / field.delta
        outs = horizon + thin * np.arange(n)
        res = simulate(
            field, triplet, x0, epsilon, float(outs[-1]), 1, child, dt=dt, output_times=outs, workers=1
        )
        states = np.vstack([b.states for b in res.get(ProcessTag.X_eps)])
    logx.debug(events.INVARIANT_ESTIMATED, epsilon=epsilon, n=n, method=method.value, horizon=horizon)
    return EmpiricalMeasure(states)


def stationary_ou_cloud(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    n: int = 4096,
    seed: int = 0,
    horizon: Optional[float] = None,
    dt: Optional[float] = None,
    workers: Optional[int] = None,
) -> EmpiricalMeasure:
    """Samples of the stationary law of the homogeneous OU process."""
    horizon = INVARIANT_HORIZON_FACTOR / field.delta if horizon is None else horizon
    res = simulate(
        field,
        triplet,
        np.zeros(field.dim),
        0.0,
        horizon,
        n,
        derive_seed(seed, "profile"),
        dt=dt,
        processes=(ProcessTag.O_hom,),
        workers=workers,
    )
    return EmpiricalMeasure(res.final(ProcessTag.O_hom).states)


# ---------------------------------------------------------------------------
# Ergodic decay
# ---------------------------------------------------------------------------


@dataclass
class ErgodicReport:
    rows: List[Dict[str, float]]
    slope: Optional[float]
    expected_slope: float

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "slope": self.slope,
            "expected_slope": self.expected_slope,
            "pass": self.passed,
        }


def decay_slope(times: Sequence[float], values: Sequence[float], floor_factor: float = 5.0) -> Optional[float]:
    """Slope of ``log value`` against ``t`` over the points above the noise floor."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > floor_factor * max(v.min(), 1e-300)
    if keep.sum() < 3:
        return None
    return float(np.polyfit(t[keep], np.log(v[keep]), 1)[0])


def ergodic_decay_check(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    epsilon: float,
    x0: Any,
    p: float,
    time_grid: Sequence[float],
    n: int = 2048,
    seed: int = 0,
    dt: Optional[float] = None,
    workers: Optional[int] = None,
    mu_hat: Optional[EmpiricalMeasure] = None,
) -> ErgodicReport:
    """Distance to equilibrium along ``time_grid`` against the contraction bound

    ``exp(-a delta t) (|x|^a + int |y|^a mu(dy))`` with ``a = min(1, p)``.
    """
    if p >= triplet.p_star:
        raise MomentOrderInvalid(f"p={p} needs p < {triplet.p_star} for a finite noise moment")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    times = sorted(float(t) for t in time_grid)
    if mu_hat is None:
        mu_hat = estimate_invariant_measure(field, triplet, epsilon, n=n, seed=seed, dt=dt, workers=workers)
    res = simulate(
        field, triplet, x0, epsilon, times[-1], n, derive_seed(seed, "noise", 1),
        dt=dt, output_times=times, workers=workers,
    )
    a = min(1.0, p)
    moment = mu_hat.moment(a)
    base = float(np.linalg.norm(x0)) ** a + moment

    def one(batch) -> WpResult:
        return wp_estimate(EmpiricalMeasure(batch.states), mu_hat, p, seed=seed)

    results = WorkerPool(workers).map(one, res.get(ProcessTag.X_eps))
    rows = []
    for t, est in zip(times, results):
        bound = math.exp(-a * field.delta * t) * base
        rows.append(
            {
                "t": t,
                "wp": est.value,
                "stderr": est.stderr,
                "bound": bound,
                "pass": bool(est.value <= bound + SIGMA_FACTOR * est.stderr),
            }
        )
    slope = decay_slope([r["t"] for r in rows], [r["wp"] for r in rows])
    return ErgodicReport(rows=rows, slope=slope, expected_slope=-a * field.delta)


# ---------------------------------------------------------------------------
# Profile
# ---------------------------------------------------------------------------


def _split(cloud: EmpiricalMeasure) -> tuple[EmpiricalMeasure, EmpiricalMeasure]:
    """Two halves of ``cloud``, the second moved onto the first one's sample mean."""
    half = cloud.n // 2
    a, b = cloud.points[:half], cloud.points[half : 2 * half]
    return EmpiricalMeasure(a), EmpiricalMeasure(b + (a.mean(axis=0) - b.mean(axis=0)))


def shifted_ou_distance(shift: Any, ou_cloud: EmpiricalMeasure, p: float, seed: int = 0) -> WpResult:
    """``W_p(shift + O, O)`` on two independent halves of ``ou_cloud``."""
    a, b = _split(ou_cloud)
    return wp_estimate(a.shifted(shift), b, p, seed=seed)


@dataclass
class ConstancyReport:
    constant: bool
    values: List[float]
    stderrs: List[float]

    def to_dict(self) -> dict:
        return asdict(self)


def profile_constancy_check(
    params: CutoffParams,
    p: float,
    ou_cloud: EmpiricalMeasure,
    r: float = 0.0,
    w: float = 1.0,
    n_points: int = 6,
    seed: int = 0,
) -> ConstancyReport:
    """Is ``z -> W_p(kappa z + O, O)`` constant along the rotating limit?"""
    period = max((2 * math.pi / t for t in params.thetas if t > 0), default=1.0)
    zs = params.limit_vector(np.linspace(0.0, period, n_points, endpoint=False))
    k = float(kappa(params, r, w))
    ests = [shifted_ou_distance(k * z, ou_cloud, p, seed=seed) for z in zs]
    vals = [e.value for e in ests]
    ses = [e.stderr for e in ests]
    constant = all(
        abs(vals[i] - vals[j]) <= SIGMA_FACTOR * math.hypot(ses[i], ses[j])
        for i in range(len(vals))
        for j in range(i + 1, len(vals))
    )
    return ConstancyReport(constant=constant, values=vals, stderrs=ses)


def theoretical_profile(
    params: CutoffParams,
    p: float,
    w: float,
    r_grid: Sequence[float],
    verdict: Optional[ProfileVerdict] = None,
    ou_cloud: Optional[EmpiricalMeasure] = None,
    seed: int = 0,
) -> List[Dict[str, float]]:
    """Limit of the normalized distance at each window offset.

    For ``p >= 1`` the value is ``kappa(r)`` times the radius of the
    omega-limit set. For ``p < 1`` it is a Monte Carlo evaluation against
    ``ou_cloud`` and carries a standard error.
    """
    verdict = profile_verdict(params, p) if verdict is None else verdict
    if verdict.granted is False:
        raise NoProfile(f"window cutoff only: {verdict.reason}")
    if p >= 1:
        radius = verdict.omega.radius
        return [{"r": float(r), "profile": float(kappa(params, r, w)) * radius, "stderr": 0.0} for r in r_grid]
    if ou_cloud is None:
        raise ValueError("p < 1 profiles need a stationary OU cloud")
    if verdict.granted is None and not profile_constancy_check(params, p, ou_cloud, w=w, seed=seed).constant:
        raise NoProfile("shift distance is not constant on the omega-limit set")
    v = params.limit_vector(0.0)[0]
    out = []
    for r in r_grid:
        est = shifted_ou_distance(float(kappa(params, r, w)) * v, ou_cloud, p, seed=seed)
        out.append({"r": float(r), "profile": est.value, "stderr": est.stderr})
    return out


# ---------------------------------------------------------------------------
# Cutoff curve
# ---------------------------------------------------------------------------


def _curve_times(schedule: CutoffSchedule, params: CutoffParams, epsilon: float) -> List[tuple[float, float]]:
    t_eps = cutoff_time(params.q, params.ell, epsilon)
    kept = []
    for r in schedule.r_grid:
        t = t_eps + r * schedule.w
        if t < 0:
            logx.warn(events.CURVE_POINT_SKIPPED, epsilon=epsilon, r=r, t=t)
            continue
        kept.append((r, t))
    return kept


def cutoff_curve(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Any,
    schedule: CutoffSchedule,
    params: CutoffParams,
    n: int = 2048,
    seed: int = 0,
    dt: Optional[float] = None,
    workers: Optional[int] = None,
    verdict: Optional[ProfileVerdict] = None,
    ou_cloud: Optional[EmpiricalMeasure] = None,
    invariant_method: InvariantMethod | str = InvariantMethod.ensemble,
    with_theory: bool = True,
) -> CutoffCurve:
    """Normalized distance to equilibrium on the ``(eps, r)`` grid.

    Every noise level gets its own noise stream and its own invariant cloud
    of ``n`` samples, so both clouds feed the exact solver at equal size.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if not np.any(x0):
        raise ValueError("x0 must be non-zero")
    schedule.check_noise(triplet)
    p = schedule.p
    pool = WorkerPool(workers)
    entries: List[CurveEntry] = []
    for i, eps in enumerate(schedule.epsilons):
        points = _curve_times(schedule, params, eps)
        if not points:
            continue
        mu_hat = estimate_invariant_measure(
            field, triplet, eps, method=invariant_method, n=n, seed=seed, dt=dt, workers=workers, index=i
        )
        times = [t for _, t in points]
        res = simulate(
            field, triplet, x0, eps, max(times), n, derive_seed(seed, "noise", i),
            dt=dt, output_times=times, workers=workers,
        )
        by_time = dict(zip(sorted(times), res.get(ProcessTag.X_eps)))
        scale = ratio_scale(eps, p)

        def one(point: tuple[float, float]) -> CurveEntry:
            r, t = point
            est = wp_estimate(EmpiricalMeasure(by_time[t].states), mu_hat, p, seed=seed)
            return CurveEntry(epsilon=eps, r=r, t=t, wp_ratio=est.value / scale, stderr=est.stderr / scale)

        for entry in pool.map(one, points):
            logx.debug(events.CURVE_POINT, epsilon=entry.epsilon, r=entry.r, value=entry.wp_ratio, stderr=entry.stderr)
            entries.append(entry)

    curve = CutoffCurve(entries=entries, p=p, w=schedule.w)
    if not with_theory:
        return curve
    verdict = profile_verdict(params, p) if verdict is None else verdict
    curve.verdict = verdict
    if verdict.granted is False:
        return curve
    if p < 1 and ou_cloud is None:
        ou_cloud = stationary_ou_cloud(field, triplet, n=2 * n, seed=seed, dt=dt, workers=workers)
    try:
        curve.theory = theoretical_profile(params, p, schedule.w, schedule.r_grid, verdict, ou_cloud, seed=seed)
    except NoProfile as exc:
        logger.info("no profile attached: {}", exc)
        return curve
    for e in curve.entries:
        e.theory = curve.theory_at(e.r)
    return curve


# ---------------------------------------------------------------------------
# Curve diagnostics
# ---------------------------------------------------------------------------


@dataclass
class ProfileFit:
    q_hat: float
    c_hat: float
    r2: float
    n_points: int
    epsilon: float

    def to_dict(self) -> dict:
        return asdict(self)


def profile_fit(curve: CutoffCurve, epsilon: Optional[float] = None, min_points: int = 4) -> ProfileFit:
    """Least-squares fit of ``log ratio = log C - q r w`` at the smallest noise level."""
    eps = min(curve.epsilons) if epsilon is None else epsilon
    usable = [e for e in curve.at(eps) if e.wp_ratio > SIGMA_FACTOR * e.stderr and e.wp_ratio > 0]
    if len(usable) < min_points:
        raise InsufficientSignal(
            f"{len(usable)} points above the noise floor at eps={eps}, need {min_points}"
        )
    x = np.array([e.r * curve.w for e in usable])
    y = np.log([e.wp_ratio for e in usable])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ProfileFit(q_hat=float(-slope), c_hat=float(math.exp(intercept)), r2=r2, n_points=len(usable), epsilon=eps)


@dataclass
class CollapseReport:
    passed: bool
    epsilons: tuple[float, float]
    gaps: List[Dict[str, float]]

    def to_dict(self) -> dict:
        return {"pass": self.passed, "epsilons": list(self.epsilons), "gaps": self.gaps}


def collapse_check(curve: CutoffCurve, r_values: Optional[Sequence[float]] = None) -> CollapseReport:
    """Ratios at the two smallest noise levels agree within three standard errors."""
    eps = sorted(curve.epsilons)
    if len(eps) < 2:
        raise InsufficientSignal("collapse check needs two noise levels")
    small, next_small = eps[0], eps[1]
    a = {e.r: e for e in curve.at(small)}
    b = {e.r: e for e in curve.at(next_small)}
    rs = sorted(set(a) & set(b)) if r_values is None else [float(r) for r in r_values]
    gaps = []
    for r in rs:
        sigma = math.hypot(a[r].stderr, b[r].stderr)
        gap = abs(a[r].wp_ratio - b[r].wp_ratio)
        gaps.append({"r": r, "gap": gap, "sigma": sigma, "pass": gap <= SIGMA_FACTOR * sigma})
    return CollapseReport(passed=all(g["pass"] for g in gaps), epsilons=(next_small, small), gaps=gaps)


@dataclass
class WindowEvidence:
    oscillating: bool
    r: Optional[float] = None
    epsilons: Optional[tuple[float, float]] = None
    gap: float = 0.0
    sigma: float = 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["epsilons"] = None if self.epsilons is None else list(self.epsilons)
        return out


def window_only_evidence(curve: CutoffCurve, n_smallest: int = 3) -> WindowEvidence:
    """Largest disagreement between noise levels at a fixed offset.

    A gap beyond three standard errors among the ``n_smallest`` levels means
    the ratio has no limit along the whole sequence.
    """
    eps = sorted(curve.epsilons)[:n_smallest]
    best = WindowEvidence(oscillating=False)
    best_z = 0.0
    by_r: Dict[float, List[CurveEntry]] = {}
    for e in curve.entries:
        if e.epsilon in eps:
            by_r.setdefault(e.r, []).append(e)
    for r, pts in sorted(by_r.items()):
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                gap = abs(pts[i].wp_ratio - pts[j].wp_ratio)
                sigma = math.hypot(pts[i].stderr, pts[j].stderr)
                z = gap / sigma if sigma > 0 else math.inf
                if z > best_z:
                    best_z = z
                    best = WindowEvidence(
                        oscillating=z > SIGMA_FACTOR,
                        r=r,
                        epsilons=(pts[i].epsilon, pts[j].epsilon),
                        gap=gap,
                        sigma=sigma,
                    )
    return best


def monotone_window(curve: CutoffCurve, epsilon: Optional[float] = None) -> bool:
    """Ratio decreasing in ``r`` up to three standard errors."""
    eps = min(curve.epsilons) if epsilon is None else epsilon
    pts = curve.at(eps)
    return all(
        b.wp_ratio <= a.wp_ratio + SIGMA_FACTOR * math.hypot(a.stderr, b.stderr)
        for a, b in zip(pts, pts[1:])
    )


# ---------------------------------------------------------------------------
# Moments and first-order approximation
# ---------------------------------------------------------------------------


@dataclass
class MomentsReport:
    rows: List[Dict[str, float]]
    plateau: float
    plateau_stderr: float

    def to_dict(self) -> dict:
        return asdict(self)


def _pth_moment(states: np.ndarray, p: float) -> tuple[float, float]:
    vals = np.linalg.norm(states, axis=1) ** p
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return float(vals.mean()), se


def moments_cutoff(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Any,
    schedule: CutoffSchedule,
    params: CutoffParams,
    n: int = 2048,
    seed: int = 0,
    dt: Optional[float] = None,
    workers: Optional[int] = None,
    ou_cloud: Optional[EmpiricalMeasure] = None,
) -> MomentsReport:
    """``E|X^eps_t|^p / eps^p`` on the window grid, with ``E|O|^p`` as the plateau."""
    schedule.check_noise(triplet)
    p = schedule.p
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    rows = []
    for i, eps in enumerate(schedule.epsilons):
        points = _curve_times(schedule, params, eps)
        if not points:
            continue
        times = [t for _, t in points]
        res = simulate(
            field, triplet, x0, eps, max(times), n, derive_seed(seed, "noise", i),
            dt=dt, output_times=times, workers=workers,
        )
        by_time = dict(zip(sorted(times), res.get(ProcessTag.X_eps)))
        for r, t in points:
            m, se = _pth_moment(by_time[t].states, p)
            rows.append({"epsilon": eps, "r": r, "t": t, "moment_ratio": m / eps**p, "stderr": se / eps**p})
    if ou_cloud is None:
        ou_cloud = stationary_ou_cloud(field, triplet, n=n, seed=seed, dt=dt, workers=workers)
    plateau, plateau_se = _pth_moment(ou_cloud.points, p)
    return MomentsReport(rows=rows, plateau=plateau, plateau_stderr=plateau_se)


@dataclass
class FwErrorReport:
    rows: List[Dict[str, float]]

    @property
    def decreasing(self) -> bool:
        xy = [r["wp_xy_over_eps"] for r in self.rows]
        return all(b <= a for a, b in zip(xy, xy[1:]))

    def to_dict(self) -> dict:
        return {"rows": self.rows, "decreasing": self.decreasing}


def fw_error_decay(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Any,
    schedule: CutoffSchedule,
    params: CutoffParams,
    n: int = 2048,
    seed: int = 0,
    dt: Optional[float] = None,
    workers: Optional[int] = None,
    ou_cloud: Optional[EmpiricalMeasure] = None,
) -> FwErrorReport:
    """Error of the first-order approximation at ``t_eps`` per noise level.

    ``wp_xy_over_eps`` is the synchronous-coupling bound on
    ``W_p(X^eps, Y^eps)``; ``wp_mu_over_eps`` compares ``eps O`` with the
    invariant cloud.
    """
    schedule.check_noise(triplet)
    p = schedule.p
    e = outer_exponent(p)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if ou_cloud is None:
        ou_cloud = stationary_ou_cloud(field, triplet, n=n, seed=seed, dt=dt, workers=workers)
    rows = []
    for i, eps in enumerate(schedule.epsilons):
        t = cutoff_time(params.q, params.ell, eps)
        res = simulate(
            field, triplet, x0, eps, t, n, derive_seed(seed, "noise", i),
            dt=dt, processes=(ProcessTag.X_eps, ProcessTag.Y_eps), workers=workers,
        )
        gap = np.linalg.norm(res.final(ProcessTag.X_eps).states - res.final(ProcessTag.Y_eps).states, axis=1)
        wp_xy = float(np.mean(gap**p)) ** e
        mu_hat = estimate_invariant_measure(field, triplet, eps, n=n, seed=seed, dt=dt, workers=workers, index=i)
        est = wp_estimate(ou_cloud.scaled(eps), mu_hat, p, seed=seed)
        scale = ratio_scale(eps, p)
        rows.append(
            {
                "epsilon": eps,
                "t": t,
                "wp_xy_over_eps": wp_xy / scale,
                "wp_mu_over_eps": est.value / scale,
                "wp_mu_stderr": est.stderr / scale,
            }
        )
    return FwErrorReport(rows=rows)


def linearization_relaxation(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Any,
    times: Sequence[float],
    p: float = 2.0,
    n: int = 2048,
    seed: int = 0,
    dt: Optional[float] = None,
    workers: Optional[int] = None,
    ou_cloud: Optional[EmpiricalMeasure] = None,
) -> List[Dict[str, float]]:
    """``W_p`` between the linearization along the flow and the stationary OU law."""
    times = sorted(float(t) for t in times)
    if ou_cloud is None:
        ou_cloud = stationary_ou_cloud(field, triplet, n=n, seed=seed, dt=dt, workers=workers)
    res = simulate(
        field, triplet, x0, 0.0, times[-1], n, derive_seed(seed, "noise", 0),
        dt=dt, output_times=times, processes=(ProcessTag.Y_fw,), workers=workers,
    )
    rows = []
    for t, batch in zip(times, res.get(ProcessTag.Y_fw)):
        est = wp_estimate(EmpiricalMeasure(batch.states), ou_cloud, p, seed=seed)
        rows.append({"t": t, "wp": est.value, "stderr": est.stderr})
    return rows


@dataclass
class MomentScaling:
    rows: List[Dict[str, float]]
    slope: float
    p: float

    def to_dict(self) -> dict:
        return asdict(self)


def moment_scaling(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Any,
    epsilons: Sequence[float],
    t: float = 1.0,
    p: float = 2.0,
    n: int = 2048,
    seed: int = 0,
    dt: Optional[float] = None,
    workers: Optional[int] = None,
) -> MomentScaling:
    """Log-log slope of ``E|X^eps_t - X^0_t|^p`` in ``eps``; close to ``p``."""
    rows = []
    for i, eps in enumerate(epsilons):
        cm = coupled_difference(
            field, triplet, x0, eps, t, dt, n,
            derive_seed(seed, "noise", i), p_list=(p,), workers=workers,
        )
        rows.append({"epsilon": float(eps), "moment": cm.theta_p_moments[float(p)]})
    slope = float(np.polyfit(np.log([r["epsilon"] for r in rows]), np.log([r["moment"] for r in rows]), 1)[0])
    return MomentScaling(rows=rows, slope=slope, p=p)


__all__ = [
    "InvariantMethod",
    "CutoffSchedule",
    "CurveEntry",
    "CutoffCurve",
    "ErgodicReport",
    "ProfileFit",
    "CollapseReport",
    "WindowEvidence",
    "MomentsReport",
    "FwErrorReport",
    "MomentScaling",
    "ConstancyReport",
    "ratio_scale",
    "gaussian_ou_ratio",
    "estimate_invariant_measure",
    "stationary_ou_cloud",
    "decay_slope",
    "ergodic_decay_check",
    "shifted_ou_distance",
    "profile_constancy_check",
    "theoretical_profile",
    "cutoff_curve",
    "profile_fit",
    "collapse_check",
    "window_only_evidence",
    "monotone_window",
    "moments_cutoff",
    "fw_error_decay",
    "linearization_relaxation",
    "moment_scaling",
]
