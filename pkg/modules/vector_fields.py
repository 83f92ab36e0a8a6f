"""Drift vector fields with Jacobians and a sampled dissipativity check.

A field describes the drift ``b`` of ``dX = -b(X) dt + eps dL``. All callables
are vectorised over leading axes: ``drift`` maps ``(..., d)`` to ``(..., d)``
and ``jacobian`` maps ``(..., d)`` to ``(..., d, d)``.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np
from loguru import logger

from core.errors import DegenerateInput, DissipativityViolation, FieldInvalid
from utils.seeding import make_rng

logger = logger.bind(module="vector_fields")

ArrayFn = Callable[[np.ndarray], np.ndarray]

ZERO_TOL = 1e-12
FD_REL_STEP = 1e-6


def _fd_jacobian(drift: ArrayFn, x: np.ndarray) -> np.ndarray:
    """Central finite differences with step ``1e-6 * max(1, |x|)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    h = FD_REL_STEP * np.maximum(1.0, np.linalg.norm(x, axis=-1))[..., None]
    jac = np.empty(x.shape + (d,))
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        step = h * e
        jac[..., :, j] = (drift(x + step) - drift(x - step)) / (2.0 * h)
    return jac


@dataclass(frozen=True)
class VectorFieldSpec:
    """Immutable drift description shared across trajectory workers."""

    dim: int
    drift: ArrayFn
    delta: float
    name: str
    jacobian_fn: Optional[ArrayFn] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise FieldInvalid(f"dimension must be >= 1, got {self.dim}")
        b0 = np.asarray(self.drift(np.zeros(self.dim)), dtype=float)
        if b0.shape != (self.dim,):
            raise FieldInvalid(f"{self.name}: drift returned shape {b0.shape}, expected ({self.dim},)")
        if np.max(np.abs(b0)) > ZERO_TOL:
            raise FieldInvalid(f"{self.name}: b(0) = {b0.tolist()} is not zero")

    def eval(self, x: np.ndarray) -> np.ndarray:
        return self.drift(np.asarray(x, dtype=float))

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jacobian_fn is None:
            return _fd_jacobian(self.drift, x)
        return self.jacobian_fn(x)

    @property
    def has_exact_jacobian(self) -> bool:
        return self.jacobian_fn is not None

    def linearization(self) -> np.ndarray:
        """``Db(0)``."""
        return np.asarray(self.jacobian(np.zeros(self.dim)), dtype=float)


# ---------------------------------------------------------------------------
# Builtin fields
# ---------------------------------------------------------------------------


def fput_field(dim: int) -> VectorFieldSpec:
    """Gradient of the quartic potential ``|x|^2/2 + |x|^4/4``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")

    def drift(x: np.ndarray) -> np.ndarray:
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return x * (1.0 + r2)

    def jac(x: np.ndarray) -> np.ndarray:
        r2 = np.sum(x * x, axis=-1)[..., None, None]
        eye = np.eye(x.shape[-1])
        return (1.0 + r2) * eye + 2.0 * x[..., :, None] * x[..., None, :]

    return VectorFieldSpec(dim=dim, drift=drift, jacobian_fn=jac, delta=1.0, name="fput")


def linear_field(matrix: Any, delta: Optional[float] = None) -> VectorFieldSpec:
    """Linear drift ``b(x) = A x``.

    ``delta`` defaults to the smallest eigenvalue of the symmetric part of
    ``A``. When that is not positive a claimed ``delta`` must be passed,
    which is how non-dissipative counterexamples are studied.
    """
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise FieldInvalid(f"linear field needs a square matrix, got {A.shape}")
    sym_min = float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())
    if delta is None:
        if sym_min <= 0:
            raise DissipativityViolation(
                f"symmetric part of A has smallest eigenvalue {sym_min:.6g} <= 0"
            )
        delta = sym_min

    def drift(x: np.ndarray) -> np.ndarray:
        return x @ A.T

    def jac(x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(A, x.shape[:-1] + A.shape).copy()

    return VectorFieldSpec(
        dim=A.shape[0],
        drift=drift,
        jacobian_fn=jac,
        delta=float(delta),
        name="linear",
        params={"matrix": A.tolist(), "symmetric_min": sym_min},
    )


class PotentialShape(str, Enum):
    """Closed-form choices for the oscillator's ``H``."""

    quadratic = "quadratic"
    quartic = "quartic"


@dataclass(frozen=True)
class OscillatorParams:
    """Perturbed harmonic oscillator in the plane.

    ``F(x) = -eta0 - gamma |x|^2`` couples the rotation speed to the radius and
    ``H(x) = -(a x1^2 + b x2^2)/2 - c x1 x2``, optionally with ``-beta |x|^4 / 4``
    added when ``shape`` is quartic. ``F(0) = -eta0`` and ``grad F(0) = 0``, so
    ``gamma`` leaves the linearization at the origin untouched.
    """

    a_coef: float
    b_coef: float
    c_coef: float
    eta0: float
    shape: PotentialShape = PotentialShape.quadratic
    beta: float = 0.0
    gamma: float = 0.0

    @property
    def discriminant(self) -> float:
        a, b, c, eta0 = self.a_coef, self.b_coef, self.c_coef, self.eta0
        return (a - b) ** 2 + 4.0 * (c**2 - eta0**2)

    def F(self, x: np.ndarray) -> np.ndarray:
        return -self.eta0 - self.gamma * np.sum(x * x, axis=-1)

    def grad_F(self, x: np.ndarray) -> np.ndarray:
        return -2.0 * self.gamma * x

    def H(self, x: np.ndarray) -> np.ndarray:
        x1, x2 = x[..., 0], x[..., 1]
        val = -0.5 * (self.a_coef * x1**2 + self.b_coef * x2**2) - self.c_coef * x1 * x2
        if self.shape is PotentialShape.quartic:
            val = val - 0.25 * self.beta * (x1**2 + x2**2) ** 2
        return val

    def grad_H(self, x: np.ndarray) -> np.ndarray:
        x1, x2 = x[..., 0], x[..., 1]
        g1 = -self.a_coef * x1 - self.c_coef * x2
        g2 = -self.b_coef * x2 - self.c_coef * x1
        g = np.stack([g1, g2], axis=-1)
        if self.shape is PotentialShape.quartic:
            g = g - self.beta * np.sum(x * x, axis=-1, keepdims=True) * x
        return g

    def hess_H(self, x: np.ndarray) -> np.ndarray:
        base = -np.array([[self.a_coef, self.c_coef], [self.c_coef, self.b_coef]])
        hess = np.broadcast_to(base, x.shape[:-1] + (2, 2)).copy()
        if self.shape is PotentialShape.quartic:
            r2 = np.sum(x * x, axis=-1)[..., None, None]
            hess = hess - self.beta * (r2 * np.eye(2) + 2.0 * x[..., :, None] * x[..., None, :])
        return hess


@dataclass(frozen=True)
class OscillatorLinearization:
    """Eigen data of ``Jb(0, 0)`` in closed form."""

    jacobian: np.ndarray
    discriminant: float
    lambda_plus: complex
    lambda_minus: complex
    v_plus: np.ndarray
    v_minus: np.ndarray

    def split(self) -> dict[str, np.ndarray]:
        return {
            "re_v_plus": self.v_plus.real,
            "im_v_plus": self.v_plus.imag,
            "re_v_minus": self.v_minus.real,
            "im_v_minus": self.v_minus.imag,
        }


def oscillator_linearization(params: OscillatorParams) -> OscillatorLinearization:
    a, b, c, eta0 = params.a_coef, params.b_coef, params.c_coef, params.eta0
    jb0 = np.array([[a, c - eta0], [c + eta0, b]])
    disc = params.discriminant
    root = np.sqrt(complex(disc))
    lam_p = 0.5 * (a + b + root)
    lam_m = 0.5 * (a + b - root)
    if abs(c - eta0) > ZERO_TOL:
        v_p = np.array([1.0, -(a - b - root) / (2.0 * (c - eta0))], dtype=complex)
        v_m = np.array([1.0, -(a - b + root) / (2.0 * (c - eta0))], dtype=complex)
    else:
        # lower-triangular [[a, 0], [k, b]]
        k = c + eta0

        def _vec(lam: complex) -> np.ndarray:
            if abs(lam - a) <= ZERO_TOL and abs(a - b) > ZERO_TOL:
                return np.array([a - b, k], dtype=complex)
            if abs(lam - a) <= ZERO_TOL and abs(k) <= ZERO_TOL:
                return np.array([1.0, 0.0], dtype=complex)
            return np.array([0.0, 1.0], dtype=complex)

        v_p = _vec(lam_p)
        v_m = _vec(lam_m)
        if abs(k) <= ZERO_TOL and abs(a - b) <= ZERO_TOL:
            v_m = np.array([0.0, 1.0], dtype=complex)
            v_p = np.array([1.0, 0.0], dtype=complex)
    return OscillatorLinearization(
        jacobian=jb0,
        discriminant=disc,
        lambda_plus=complex(lam_p),
        lambda_minus=complex(lam_m),
        v_plus=v_p,
        v_minus=v_m,
    )


def oscillator_field(
    params: OscillatorParams,
    delta: Optional[float] = None,
    n_check: int = 2000,
    check_radius: float = 3.0,
    seed: int = 0,
) -> VectorFieldSpec:
    """Drift ``b = (x2 F - d1 H, -x1 F - d2 H)`` of the perturbed oscillator.

    A constant ``F`` cancels in ``<b(x) - b(y), x - y>`` and a radial ``F`` is
    dominated by the quartic term when ``beta >= |gamma|``, so the claimed
    ``delta`` defaults to the smallest eigenvalue of ``[[a, c], [c, b]]``.
    The condition is then checked on ``n_check`` sampled pairs.
    """
    if params.shape is PotentialShape.quartic and params.beta < 0:
        raise DissipativityViolation("quartic coefficient beta must be >= 0")
    if params.gamma != 0.0:
        # the radial coupling adds a form with eigenvalues +-gamma |x|^2
        beta = params.beta if params.shape is PotentialShape.quartic else 0.0
        if beta < abs(params.gamma):
            raise DissipativityViolation(
                f"radial coupling gamma={params.gamma:.6g} needs a quartic H with beta >= |gamma|"
            )
    sym = np.array([[params.a_coef, params.c_coef], [params.c_coef, params.b_coef]])
    claimed = float(np.linalg.eigvalsh(sym).min()) if delta is None else float(delta)
    if claimed <= 0:
        raise DissipativityViolation(
            f"oscillator quadratic form has smallest eigenvalue {claimed:.6g} <= 0"
        )

    def drift(x: np.ndarray) -> np.ndarray:
        f = params.F(x)
        g = params.grad_H(x)
        return np.stack([x[..., 1] * f - g[..., 0], -x[..., 0] * f - g[..., 1]], axis=-1)

    def jac(x: np.ndarray) -> np.ndarray:
        f = params.F(x)[..., None, None]
        rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
        # rows (x2, -x1) times grad F
        turn = np.stack([x[..., 1], -x[..., 0]], axis=-1)
        coupling = turn[..., :, None] * params.grad_F(x)[..., None, :]
        return f * rot + coupling - params.hess_H(x)

    spec = VectorFieldSpec(
        dim=2,
        drift=drift,
        jacobian_fn=jac,
        delta=claimed,
        name="oscillator",
        params={
            "a": params.a_coef,
            "b": params.b_coef,
            "c": params.c_coef,
            "eta0": params.eta0,
            "shape": params.shape.value,
            "beta": params.beta,
            "gamma": params.gamma,
        },
    )
    report = check_dissipativity(spec, n_pairs=n_check, radius=check_radius, seed=seed)
    if not report.passed:
        raise DissipativityViolation(
            f"oscillator condition fails: min ratio {report.min_ratio:.6g} < delta {claimed:.6g}"
        )
    return spec


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DissipativityReport:
    min_ratio: float
    passed: bool
    delta: float
    n_pairs: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_ratio": self.min_ratio,
            "pass": self.passed,
            "delta": self.delta,
            "n_pairs": self.n_pairs,
        }


def _uniform_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return g * r[:, None]


def check_dissipativity(
    field: VectorFieldSpec,
    n_pairs: int = 10_000,
    radius: float = 1.0,
    seed: int = 0,
    max_resample: int = 10,
) -> DissipativityReport:
    """Minimum of ``<b(x)-b(y), x-y> / |x-y|^2`` over pairs sampled in a ball."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = make_rng(seed, "dissipativity")
    x = _uniform_ball(rng, n_pairs, field.dim, radius)
    y = _uniform_ball(rng, n_pairs, field.dim, radius)
    floor = 1e-12 * radius
    for _ in range(max_resample):
        close = np.linalg.norm(x - y, axis=1) <= floor
        if not close.any():
            break
        y[close] = _uniform_ball(rng, int(close.sum()), field.dim, radius)
    else:
        raise DegenerateInput("sampled pairs keep coinciding; check radius")
    u = x - y
    num = np.sum((field.eval(x) - field.eval(y)) * u, axis=1)
    ratio = num / np.sum(u * u, axis=1)
    min_ratio = float(ratio.min())
    passed = min_ratio >= field.delta * (1.0 - 1e-9)
    logger.debug("dissipativity {} min_ratio={:.6g} delta={:.6g}", field.name, min_ratio, field.delta)
    return DissipativityReport(min_ratio=min_ratio, passed=passed, delta=field.delta, n_pairs=n_pairs)


@dataclass(frozen=True)
class JacobianReport:
    max_rel_error: float
    passed: bool
    n_points: int


def verify_jacobian(
    field: VectorFieldSpec,
    n_points: int = 100,
    radius: float = 1.0,
    seed: int = 0,
    rtol: float = 1e-6,
) -> JacobianReport:
    """Compare the Jacobian with central finite differences at sampled points."""
    rng = make_rng(seed, "jacobian")
    pts = _uniform_ball(rng, n_points, field.dim, radius)
    exact = field.jacobian(pts)
    approx = _fd_jacobian(field.drift, pts)
    scale = np.maximum(1.0, np.abs(exact).max(axis=(-2, -1)))
    err = np.abs(exact - approx).max(axis=(-2, -1)) / scale
    worst = float(err.max())
    return JacobianReport(max_rel_error=worst, passed=worst <= rtol, n_points=n_points)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

FIELD_BUILDERS: "OrderedDict[str, Callable[..., VectorFieldSpec]]" = OrderedDict()


def register(name: str) -> Callable[[Callable[..., VectorFieldSpec]], Callable[..., VectorFieldSpec]]:
    """Register a field builder under ``name`` for config lookup."""

    def decorator(fn: Callable[..., VectorFieldSpec]) -> Callable[..., VectorFieldSpec]:
        FIELD_BUILDERS[name] = fn
        return fn

    return decorator


@register("fput")
def _build_fput(dim: int = 1, **_: Any) -> VectorFieldSpec:
    return fput_field(dim)


@register("linear")
def _build_linear(matrix: Any = None, delta: Optional[float] = None, dim: int = 1, **_: Any) -> VectorFieldSpec:
    if matrix is None:
        matrix = np.eye(dim)
    return linear_field(matrix, delta=delta)


@register("oscillator")
def _build_oscillator(
    a: float = 1.0,
    b: float = 1.0,
    c: float = 0.0,
    eta0: float = 0.0,
    shape: str = "quadratic",
    beta: float = 0.0,
    gamma: float = 0.0,
    delta: Optional[float] = None,
    **_: Any,
) -> VectorFieldSpec:
    params = OscillatorParams(
        a_coef=a, b_coef=b, c_coef=c, eta0=eta0, shape=PotentialShape(shape), beta=beta, gamma=gamma
    )
    return oscillator_field(params, delta=delta)


def build_field(name: str, **params: Any) -> VectorFieldSpec:
    try:
        builder = FIELD_BUILDERS[name]
    except KeyError:
        raise FieldInvalid(f"unknown field {name!r}; expected one of {list(FIELD_BUILDERS)}") from None
    return builder(**params)


__all__ = [
    "VectorFieldSpec",
    "OscillatorParams",
    "OscillatorLinearization",
    "PotentialShape",
    "DissipativityReport",
    "JacobianReport",
    "fput_field",
    "linear_field",
    "oscillator_field",
    "oscillator_linearization",
    "check_dissipativity",
    "verify_jacobian",
    "build_field",
    "register",
    "FIELD_BUILDERS",
]
