"""Cutoff parameters from the linearisation at the fixed point.

For a Hurwitz generator ``-A`` (``A = Db(0)``) and a start ``w`` the exact
decomposition

    e^{-At} w = sum_lambda e^{-lambda t} sum_j (-t)^j / j! (A - lambda)^j P_lambda w

is read off numerically. The slowest contributing real part is ``q``, the
largest surviving power of ``t`` is ``ell - 1`` and the dominant terms give
the rotation frequencies ``thetas`` and limiting vectors ``vs`` such that

    e^{qt} t^{1-ell} e^{-At} w - sum_k e^{i theta_k t} v_k -> 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.linalg import expm

from core import events
from core.errors import DefectiveAmbiguity, EigenvalueInStability, FlowDidNotEnter
from modules.sde_sim import rk4_step
from modules.vector_fields import VectorFieldSpec
from utils import logx
from utils.seeding import make_rng

logger = logger.bind(module="spectral")

CLUSTER_TOL = 1e-5
PROJECTION_TOL = 1e-9
RANK_ZERO = 1e-7
RANK_NONZERO = 1e-4
SPHERE_TOL = 1e-6
RESONANCE_TOL = 1e-9
RESONANCE_H_MAX = 20
CONJ_TOL = 1e-10


@dataclass
class EigenCluster:
    """One cluster of numerically coincident eigenvalues."""

    value: complex
    multiplicity: int
    order: int = 0
    jordan_blocks: List[int] = field(default_factory=list)
    weight: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "re": float(self.value.real),
            "im": float(self.value.imag),
            "multiplicity": self.multiplicity,
            "order": self.order,
            "jordan_blocks": list(self.jordan_blocks),
            "weight": self.weight,
        }


@dataclass
class CutoffParams:
    q: float
    ell: int
    m: int
    thetas: List[float]
    vs: List[np.ndarray]
    tau: float = 0.0
    tau_bound: Optional[float] = None
    r0: Optional[float] = None
    w: Optional[np.ndarray] = None
    clusters: List[EigenCluster] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.vs[0].shape[0])

    def limit_vector(self, t: float | np.ndarray) -> np.ndarray:
        """``sum_k e^{i theta_k t} v_k`` (real by conjugate symmetry)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        acc = np.zeros((t.size, self.dim), dtype=complex)
        for theta, v in zip(self.thetas, self.vs):
            acc += np.exp(1j * theta * t)[:, None] * v[None, :]
        return acc.real

    def vector_norm_sum(self) -> float:
        return float(sum(np.linalg.norm(v) for v in self.vs))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "ell": self.ell,
            "m": self.m,
            "thetas": [float(t) for t in self.thetas],
            "vs": [{"re": v.real.tolist(), "im": v.imag.tolist()} for v in self.vs],
            "tau": self.tau,
            "tau_bound": self.tau_bound,
            "R0": self.r0,
            "w": None if self.w is None else np.asarray(self.w).tolist(),
            "clusters": [c.to_dict() for c in self.clusters],
        }


# ---------------------------------------------------------------------------
# Eigen analysis
# ---------------------------------------------------------------------------


def cluster_eigenvalues(eigs: np.ndarray, tol: float = CLUSTER_TOL) -> List[EigenCluster]:
    """Group eigenvalues closer than ``tol * max(1, |lambda|)``."""
    remaining = sorted(list(np.asarray(eigs, dtype=complex)), key=lambda z: (z.real, z.imag))
    clusters: List[EigenCluster] = []
    while remaining:
        seed = remaining.pop(0)
        members = [seed]
        rest = []
        for z in remaining:
            if abs(z - seed) <= tol * max(1.0, abs(seed)):
                members.append(z)
            else:
                rest.append(z)
        remaining = rest
        clusters.append(EigenCluster(value=complex(np.mean(members)), multiplicity=len(members)))
    return clusters


def _classify(norm: float, scale: float, what: str) -> bool:
    """``True`` for a non-zero decision, ``False`` for zero, raise in the band."""
    rel = norm / scale
    if rel <= RANK_ZERO:
        return False
    if rel >= RANK_NONZERO:
        return True
    raise DefectiveAmbiguity(f"{what}: relative size {rel:.3e} falls inside the ambiguity band")


def _jordan_blocks(nil: np.ndarray, scale: float) -> List[int]:
    """Jordan block sizes of the (nearly) nilpotent restriction ``nil``."""
    n = nil.shape[0]
    nullity = [0]
    power = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        power = power @ nil
        sv = np.linalg.svd(power, compute_uv=False)
        rank = sum(_classify(s, scale**k, f"rank of N^{k}") for s in sv)
        nullity.append(n - rank)
        if nullity[-1] == n:
            break
    # number of blocks of size >= k is nullity[k] - nullity[k-1]
    at_least = [nullity[k] - nullity[k - 1] for k in range(1, len(nullity))]
    sizes: List[int] = []
    for k, count in enumerate(at_least, start=1):
        bigger = at_least[k] if k < len(at_least) else 0
        sizes.extend([k] * (count - bigger))
    return sorted(sizes, reverse=True)


def _order_terms(thetas: List[float], vs: List[np.ndarray]) -> tuple[List[float], List[np.ndarray]]:
    """Put ``theta = 0`` first and then ``(theta, -theta)`` pairs with conjugate vectors."""
    zero = [(t, v) for t, v in zip(thetas, vs) if abs(t) <= CONJ_TOL]
    pos = sorted([(t, v) for t, v in zip(thetas, vs) if t > CONJ_TOL], key=lambda tv: tv[0])
    out_t: List[float] = []
    out_v: List[np.ndarray] = []
    for _, v in zero:
        out_t.append(0.0)
        out_v.append(v.real.astype(complex))
    for t, v in pos:
        out_t.extend([t, -t])
        out_v.extend([v, np.conj(v)])
    return out_t, out_v


def linear_cutoff_params(
    A: Any,
    w: Any,
    tol: float = PROJECTION_TOL,
    cluster_tol: float = CLUSTER_TOL,
) -> CutoffParams:
    """Rate, order, frequencies and limiting vectors of ``e^{-At} w``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w = np.asarray(w, dtype=float).reshape(-1)
    n = A.shape[0]
    if w.shape[0] != n:
        raise ValueError(f"w has dimension {w.shape[0]}, matrix is {n}x{n}")
    w_norm = float(np.linalg.norm(w))
    if w_norm == 0:
        raise ValueError("w must be non-zero")
    eigs = np.linalg.eigvals(A)
    if np.any(eigs.real <= tol):
        raise EigenvalueInStability(
            f"Db(0) has eigenvalues with non-positive real part: {np.round(eigs, 12).tolist()}"
        )
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    clusters = cluster_eigenvalues(eigs, cluster_tol)

    bases = []
    for cl in clusters:
        nil = A.astype(complex) - cl.value * np.eye(n)
        power = np.linalg.matrix_power(nil, cl.multiplicity)
        _, sv, vh = np.linalg.svd(power)
        basis = vh[n - cl.multiplicity :].conj().T
        gap_ok = cl.multiplicity == n or _classify(
            float(sv[n - cl.multiplicity - 1]), scale**cl.multiplicity, "generalized eigenspace gap"
        )
        if not gap_ok:
            raise DefectiveAmbiguity(f"eigenvalue {cl.value:.6g} has a larger null space than its cluster")
        bases.append(basis)
        restricted = basis.conj().T @ nil @ basis
        cl.jordan_blocks = _jordan_blocks(restricted, scale)

    V = np.hstack(bases)
    if np.linalg.cond(V) > 1e12:
        raise DefectiveAmbiguity("generalized eigenspaces are numerically dependent")
    coeffs = np.linalg.solve(V, w.astype(complex))

    terms: Dict[int, List[np.ndarray]] = {}
    offset = 0
    for idx, (cl, basis) in enumerate(zip(clusters, bases)):
        comp = basis @ coeffs[offset : offset + cl.multiplicity]
        offset += cl.multiplicity
        cl.weight = float(np.linalg.norm(comp) / w_norm)
        if cl.weight <= tol:
            continue
        nil = A.astype(complex) - cl.value * np.eye(n)
        us = [comp]
        for _ in range(1, cl.multiplicity):
            us.append(nil @ us[-1])
        order = 0
        comp_norm = float(np.linalg.norm(comp))
        for j in range(1, len(us)):
            if _classify(float(np.linalg.norm(us[j])), comp_norm * scale**j, f"order {j} term"):
                order = j
        cl.order = order
        terms[idx] = us

    contributing = [clusters[i] for i in terms]
    q = min(c.value.real for c in contributing)
    slow = [i for i in terms if abs(clusters[i].value.real - q) <= cluster_tol * max(1.0, q)]
    top = max(clusters[i].order for i in slow)
    ell = top + 1

    thetas: List[float] = []
    vs: List[np.ndarray] = []
    for i in slow:
        cl = clusters[i]
        if cl.order != top:
            continue
        v = ((-1) ** top / math.factorial(top)) * terms[i][top]
        thetas.append(float(-cl.value.imag))
        vs.append(v)
    thetas, vs = _order_terms(thetas, vs)

    params = CutoffParams(
        q=float(q),
        ell=int(ell),
        m=len(thetas),
        thetas=thetas,
        vs=vs,
        tau=0.0,
        w=w.copy(),
        clusters=clusters,
    )
    logx.debug(events.SPECTRAL_EXTRACTED, q=params.q, ell=params.ell, m=params.m)
    return params


def verify_hg_limit(params: CutoffParams, A: Any, w: Any, t_grid: Sequence[float]) -> float:
    """Worst deviation from the limit over the tail half of ``t_grid``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w = np.asarray(w, dtype=float).reshape(-1)
    grid = np.asarray(t_grid, dtype=float)
    tail = grid[grid.size // 2 :]
    tail = tail[tail > 0]
    shifted = A - params.q * np.eye(A.shape[0])
    worst = 0.0
    for t in tail:
        lhs = (expm(-shifted * t) @ w) / t ** (params.ell - 1)
        rhs = params.limit_vector(t)[0]
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


# ---------------------------------------------------------------------------
# Nonlinear flows
# ---------------------------------------------------------------------------


def default_r0(field: VectorFieldSpec, n_directions: int = 64, seed: int = 0, ratio: float = 0.1) -> float:
    """Largest radius in ``1, 1/2, 1/4, ...`` where the Taylor remainder of ``b``
    stays below ``ratio`` times the linear term on the sphere."""
    A = field.linearization()
    rng = make_rng(seed, "r0")
    dirs = rng.standard_normal((n_directions, field.dim))
    dirs = np.vstack([np.eye(field.dim), -np.eye(field.dim), dirs])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radius = 1.0
    for _ in range(40):
        x = radius * dirs
        lin = x @ A.T
        rem = field.eval(x) - lin
        if np.all(np.linalg.norm(rem, axis=1) <= ratio * np.linalg.norm(lin, axis=1)):
            return radius
        radius *= 0.5
    return radius


def nonlinear_cutoff_params(
    field: VectorFieldSpec,
    x: Any,
    r0: Optional[float] = None,
    dt: float = 1e-3,
    horizon: Optional[float] = None,
) -> CutoffParams:
    """Flow ``x`` into the ball of radius ``R0/2`` and read the parameters there."""
    x = np.asarray(x, dtype=float).reshape(-1)
    norm_x = float(np.linalg.norm(x))
    if norm_x == 0:
        raise ValueError("x must be non-zero")
    r0 = default_r0(field) if r0 is None else float(r0)
    target = 0.5 * r0
    tau_bound = max(0.0, math.log(2.0 * norm_x / r0) / field.delta)
    horizon = max(2.0 * tau_bound, 10.0 / field.delta) if horizon is None else horizon

    t = 0.0
    state = x.copy()
    if norm_x > target:
        while True:
            if t > horizon:
                raise FlowDidNotEnter(
                    f"flow from |x|={norm_x:.4g} did not reach radius {target:.4g} by t={horizon:.4g}"
                )
            nxt = rk4_step(field, state, dt)
            if np.linalg.norm(nxt) <= target:
                # bisect the crossing inside the last step
                lo, hi = 0.0, dt
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if np.linalg.norm(rk4_step(field, state, mid)) <= target:
                        hi = mid
                    else:
                        lo = mid
                state = rk4_step(field, state, hi)
                t += hi
                break
            state, t = nxt, t + dt
    logx.debug(events.FLOW_ENTERED, tau=t, tau_bound=tau_bound, r0=r0)
    params = linear_cutoff_params(field.linearization(), state)
    params.tau = float(t)
    params.tau_bound = float(tau_bound)
    params.r0 = r0
    params.w = state
    return params


# ---------------------------------------------------------------------------
# Profile conditions
# ---------------------------------------------------------------------------


@dataclass
class OmegaLimitSet:
    samples: np.ndarray
    is_sphere: bool
    radius: float
    min_norm: float
    max_norm: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "is_sphere": self.is_sphere,
            "radius": self.radius,
            "min_norm": self.min_norm,
            "max_norm": self.max_norm,
        }


def omega_limit_set(
    params: CutoffParams,
    t_max: float = 1000.0,
    n_samples: int = 2000,
    sphere_tol: float = SPHERE_TOL,
) -> OmegaLimitSet:
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    ts = np.linspace(0.5 * t_max, t_max, n_samples)
    pts = params.limit_vector(ts)
    norms = np.linalg.norm(pts, axis=1)
    lo, hi = float(norms.min()), float(norms.max())
    is_sphere = hi > 0 and (hi - lo) / hi < sphere_tol
    radius = float(norms.mean()) if is_sphere else hi
    return OmegaLimitSet(samples=pts, is_sphere=bool(is_sphere), radius=radius, min_norm=lo, max_norm=hi)


@dataclass
class NonResonance:
    resonant: bool
    witness: Optional[tuple[int, ...]]
    reading: str = "rational_independence"
    literal_condition_differs: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "resonant": self.resonant,
            "witness": None if self.witness is None else list(self.witness),
            "reading": self.reading,
            "literal_condition_differs": self.literal_condition_differs,
        }


def non_resonance_check(
    thetas: Sequence[float], h_max: int = RESONANCE_H_MAX, tol: float = RESONANCE_TOL
) -> NonResonance:
    """Search integer vectors ``h`` with ``sum h_i theta_i`` in ``2 pi Z``.

    ``thetas`` are the positive representatives, one per conjugate pair.
    Candidates are scanned by increasing ``max |h_i|``; the witness is
    sign-normalised so its first non-zero entry is positive.
    """
    th = np.asarray(list(thetas), dtype=float)
    if th.size == 0:
        return NonResonance(resonant=False, witness=None)
    two_pi = 2.0 * math.pi
    for level in range(1, h_max + 1):
        for h in itertools.product(range(-level, level + 1), repeat=th.size):
            if max(abs(v) for v in h) != level:
                continue
            s = float(np.dot(h, th))
            if abs(s - two_pi * round(s / two_pi)) < tol:
                first = next(v for v in h if v != 0)
                witness = tuple(int(v) if first > 0 else int(-v) for v in h)
                return NonResonance(resonant=True, witness=witness)
    return NonResonance(resonant=False, witness=None)


def positive_thetas(params: CutoffParams) -> List[float]:
    return [t for t in params.thetas if t > CONJ_TOL]


def normal_growth_check(params: CutoffParams, tol: float = 1e-8) -> bool:
    """Orthogonality of ``(v_0, Re v_k, Im v_k, ...)`` and ``|Re v_k| = |Im v_k|``."""
    family: List[np.ndarray] = []
    for theta, v in zip(params.thetas, params.vs):
        if abs(theta) <= CONJ_TOL:
            family.append(v.real)
        elif theta > 0:
            re, im = v.real, v.imag
            nr, ni = np.linalg.norm(re), np.linalg.norm(im)
            if abs(nr - ni) > tol * max(nr, ni, 1e-300):
                return False
            family.extend([re, im])
    for a, b in itertools.combinations(family, 2):
        if abs(float(a @ b)) > tol * max(np.linalg.norm(a) * np.linalg.norm(b), 1e-300):
            return False
    return True


def cutoff_time(q: float, ell: int, epsilon: float) -> float:
    """``|ln eps| / q + (ell - 1) / q * ln |ln eps|``."""
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    le = abs(math.log(epsilon))
    return le / q + (ell - 1) / q * math.log(le)


def kappa(params: CutoffParams, r: float | np.ndarray, w: float = 1.0) -> np.ndarray:
    """Profile prefactor ``e^{-q r w} e^{q tau} / q^{ell - 1}``."""
    r = np.asarray(r, dtype=float)
    return np.exp(-params.q * r * w + params.q * params.tau) / params.q ** (params.ell - 1)


@dataclass
class ProfileVerdict:
    """Whether an explicit profile limit exists at order ``p``.

    ``granted`` is ``None`` when only a Monte Carlo constancy check can
    decide (``p < 1`` with a rotating limit).
    """

    granted: Optional[bool]
    p: float
    omega: OmegaLimitSet
    non_resonance: NonResonance
    normal_growth: bool
    reason: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "granted": self.granted,
            "p": self.p,
            "omega": self.omega.to_dict(),
            "non_resonance": self.non_resonance.to_dict(),
            "normal_growth": self.normal_growth,
            "reason": self.reason,
        }


def profile_verdict(
    params: CutoffParams,
    p: float,
    sphere_tol: float = SPHERE_TOL,
    t_max: Optional[float] = None,
    n_samples: int = 2000,
) -> ProfileVerdict:
    pos = positive_thetas(params)
    if t_max is None:
        t_max = 1000.0 if not pos else max(1000.0, 200.0 * 2.0 * math.pi / min(pos))
    omega = omega_limit_set(params, t_max=t_max, n_samples=n_samples, sphere_tol=sphere_tol)
    nr = non_resonance_check(pos)
    growth = normal_growth_check(params)
    if params.m == 1:
        granted: Optional[bool] = True
        reason = "single limiting vector"
    elif p >= 1:
        granted = omega.is_sphere
        reason = "omega-limit set on a sphere" if granted else "omega-limit set not on a sphere"
    else:
        granted = None
        reason = "rotating limit at p < 1 needs a Monte Carlo constancy check"
    if not nr.resonant and p >= 1 and growth != omega.is_sphere:
        logger.warning("non-resonant frequencies but sphere test and normal growth disagree")
    logx.event(events.PROFILE_VERDICT, granted=granted, p=p, reason=reason)
    return ProfileVerdict(
        granted=granted, p=p, omega=omega, non_resonance=nr, normal_growth=growth, reason=reason
    )


__all__ = [
    "EigenCluster",
    "CutoffParams",
    "OmegaLimitSet",
    "NonResonance",
    "ProfileVerdict",
    "cluster_eigenvalues",
    "linear_cutoff_params",
    "verify_hg_limit",
    "default_r0",
    "nonlinear_cutoff_params",
    "omega_limit_set",
    "non_resonance_check",
    "positive_thetas",
    "normal_growth_check",
    "cutoff_time",
    "kappa",
    "profile_verdict",
]
