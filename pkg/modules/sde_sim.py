"""Simulation of the small-noise SDE and its comparison processes.

Five processes are integrated on a shared time grid:

* ``X_eps``  the noisy system ``dX = -b(X) dt + eps dL``,
* ``X_zero`` the deterministic flow,
* ``Y_fw``   the linearisation along the flow ``dY = -Db(X0_t) Y dt + dL``,
* ``O_hom``  the homogeneous OU process ``dO = -Db(0) O dt + dL``,
* ``Y_eps``  the first-order approximation ``X0 + eps Y_fw``.

Noisy processes use Euler-Maruyama and consume one increment stream per
trajectory block, so every process requested in one call sees the same
noise path. The standalone deterministic flow uses classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.linalg import expm, solve_continuous_lyapunov

from core import events
from core.errors import DimensionMismatch, NonFiniteState, StepSizeTooLarge
from modules.levy_noise import LevyTriplet, sample_increments
from modules.vector_fields import VectorFieldSpec
from utils import logx
from utils.seeding import BLOCK_SIZE, block_stream, blocks
from workers.pool import WorkerPool

logger = logger.bind(module="sde_sim")

GRID_TOL = 1e-12
PROGRESS_INTERVAL = 5.0


class ProcessTag(str, Enum):
    X_eps = "X_eps"
    X_zero = "X_zero"
    Y_fw = "Y_fw"
    O_hom = "O_hom"
    Y_eps = "Y_eps"


@dataclass
class TrajectoryBatch:
    """Positions of ``n_traj`` trajectories of one process at one time.

    ``step`` is the index of ``time`` on the integration grid.
    """

    states: np.ndarray
    time: float
    epsilon: float
    process_tag: ProcessTag
    trajectory_ids: Optional[np.ndarray] = None
    step: int = 0

    def __post_init__(self) -> None:
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.trajectory_ids is None:
            self.trajectory_ids = np.arange(self.states.shape[0])
        if not np.isfinite(self.states).all():
            bad = int(np.argwhere(~np.isfinite(self.states).all(axis=1))[0, 0])
            raise NonFiniteState(int(self.trajectory_ids[bad]), self.step, self.process_tag.value)

    @property
    def n_traj(self) -> int:
        return int(self.states.shape[0])


@dataclass
class CoupledPair:
    """``X_eps`` and ``Y_eps`` batches driven by identical increment streams."""

    x_eps: List[TrajectoryBatch]
    y_eps: List[TrajectoryBatch]
    master_seed: int

    def __post_init__(self) -> None:
        if len(self.x_eps) != len(self.y_eps):
            raise DimensionMismatch("coupled batches must share the time grid")
        for xb, yb in zip(self.x_eps, self.y_eps):
            if xb.n_traj != yb.n_traj or abs(xb.time - yb.time) > GRID_TOL:
                raise DimensionMismatch("coupled batches must share trajectories and times")


@dataclass
class DeterministicPath:
    times: np.ndarray
    states: np.ndarray

    def at(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9:
            raise ValueError(f"time {t} is not on the path grid")
        return self.states[idx]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# ---------------------------------------------------------------------------
# Grid helpers
# ---------------------------------------------------------------------------


def default_dt(delta: float) -> float:
    return min(1e-2, 0.05 / delta)


def check_dt(dt: float, delta: float) -> None:
    if dt <= 0:
        raise StepSizeTooLarge(f"dt must be positive, got {dt}")
    if dt > 0.1 / delta * (1 + 1e-12):
        raise StepSizeTooLarge(f"dt={dt} exceeds the stability guard 0.1/delta={0.1 / delta:.6g}")


def time_grid(t_end: float, dt: float, output_times: Optional[Iterable[float]] = None) -> np.ndarray:
    """Union of the uniform grid ``k dt`` and the requested output times."""
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    n = int(math.floor(t_end / dt + GRID_TOL))
    pts = [np.arange(n + 1) * dt, np.array([0.0, t_end])]
    if output_times is not None:
        extra = np.asarray(list(output_times), dtype=float)
        if extra.size and (extra.min() < 0 or extra.max() > t_end + GRID_TOL):
            raise ValueError("output times must lie in [0, t_end]")
        pts.append(np.clip(extra, 0.0, t_end))
    grid = np.unique(np.concatenate(pts))
    grid = grid[grid <= t_end + GRID_TOL]
    keep = np.concatenate([[True], np.diff(grid) > GRID_TOL])
    return grid[keep]


def _output_index(grid: np.ndarray, times: Sequence[float]) -> List[int]:
    t = np.asarray(times, dtype=float)
    hi = np.clip(np.searchsorted(grid, t), 1, grid.size - 1) if grid.size > 1 else np.zeros(t.size, int)
    lo = np.maximum(hi - 1, 0)
    pick = np.where(np.abs(grid[lo] - t) <= np.abs(grid[hi] - t), lo, hi)
    return [int(i) for i in pick]


# ---------------------------------------------------------------------------
# Deterministic flow
# ---------------------------------------------------------------------------


def rk4_step(field: VectorFieldSpec, x: np.ndarray, h: float) -> np.ndarray:
    k1 = -field.eval(x)
    k2 = -field.eval(x + 0.5 * h * k1)
    k3 = -field.eval(x + 0.5 * h * k2)
    k4 = -field.eval(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_deterministic(
    field: VectorFieldSpec,
    x0: Sequence[float] | np.ndarray,
    t_end: float,
    dt: float,
    output_times: Optional[Iterable[float]] = None,
    check_contraction: bool = True,
) -> DeterministicPath:
    """RK4 integration of ``x' = -b(x)``; ``x0`` may be ``(d,)`` or ``(n, d)``.

    The path is checked against ``|X_t| <= exp(-delta t) |x0| (1 + 10 dt)``;
    three consecutive violations raise :class:`StepSizeTooLarge`.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x0, dtype=float)
    if x.shape[-1] != field.dim:
        raise DimensionMismatch(f"x0 has dimension {x.shape[-1]}, field has {field.dim}")
    grid = time_grid(t_end, dt, output_times)
    states = np.empty((grid.size,) + x.shape)
    states[0] = x
    r0 = np.linalg.norm(x, axis=-1)
    streak = 0
    for i in range(1, grid.size):
        h = grid[i] - grid[i - 1]
        x = rk4_step(field, x, h)
        states[i] = x
        if check_contraction:
            bound = np.exp(-field.delta * grid[i]) * r0 * (1.0 + 10.0 * dt) + 1e-14
            if np.any(np.linalg.norm(x, axis=-1) > bound):
                streak += 1
                if streak >= 3:
                    raise StepSizeTooLarge(
                        f"deterministic flow of {field.name} breaks contraction at t={grid[i]:.6g}"
                    )
            else:
                streak = 0
    return DeterministicPath(times=grid, states=states)


# ---------------------------------------------------------------------------
# Stochastic engine
# ---------------------------------------------------------------------------


def _linear_step(y: np.ndarray, jac: np.ndarray, h: float, inc: np.ndarray) -> np.ndarray:
    return y - h * (y @ jac.T) + inc


def _euler_flow(field: VectorFieldSpec, x0: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Noise-free Euler path, the ``X_zero`` the noisy processes are compared with."""
    path = np.empty((grid.size, field.dim))
    path[0] = x0
    for i in range(1, grid.size):
        h = grid[i] - grid[i - 1]
        path[i] = path[i - 1] - h * field.eval(path[i - 1])
    return path


@dataclass
class _Job:
    block: int
    start: int
    stop: int


@dataclass
class SimulationResult:
    """Per-process batches at each requested output time."""

    times: List[float]
    epsilon: float
    batches: Dict[ProcessTag, List[TrajectoryBatch]] = field(default_factory=dict)

    def get(self, tag: ProcessTag) -> List[TrajectoryBatch]:
        return self.batches[tag]

    def final(self, tag: ProcessTag) -> TrajectoryBatch:
        return self.batches[tag][-1]


def simulate(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Sequence[float] | np.ndarray,
    epsilon: float,
    t_end: float,
    n_traj: int,
    master_seed: int,
    dt: Optional[float] = None,
    output_times: Optional[Iterable[float]] = None,
    processes: Sequence[ProcessTag] = (ProcessTag.X_eps,),
    o0: Optional[np.ndarray] = None,
    x0_per_traj: Optional[np.ndarray] = None,
    workers: Optional[int] = None,
    stream: str = "noise",
) -> SimulationResult:
    """Run the requested processes on shared increment streams.

    ``o0`` sets the OU start (``(d,)`` or ``(n_traj, d)``, default zero) and
    ``x0_per_traj`` overrides ``x0`` for ``X_eps`` trajectory by trajectory.
    """
    if triplet.dim != field.dim:
        raise DimensionMismatch(f"noise dimension {triplet.dim} != field dimension {field.dim}")
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    dt = default_dt(field.delta) if dt is None else float(dt)
    check_dt(dt, field.delta)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != field.dim:
        raise DimensionMismatch(f"x0 has dimension {x0.shape[0]}, field has {field.dim}")
    outs = [t_end] if output_times is None else sorted(float(t) for t in output_times)
    grid = time_grid(t_end, dt, outs)
    out_idx = _output_index(grid, outs)
    slots: Dict[int, List[int]] = {}
    for j, gi in enumerate(out_idx):
        slots.setdefault(gi, []).append(j)
    tags = list(dict.fromkeys(ProcessTag(t) for t in processes))

    need_flow = any(t in (ProcessTag.X_zero, ProcessTag.Y_fw, ProcessTag.Y_eps) for t in tags)
    flow = _euler_flow(field, x0, grid) if need_flow else None
    flow_jac = field.jacobian(flow) if flow is not None and (
        ProcessTag.Y_fw in tags or ProcessTag.Y_eps in tags
    ) else None
    a0 = field.linearization()

    logx.event(
        events.SIM_START,
        process=",".join(t.value for t in tags),
        n_traj=n_traj,
        n_steps=int(grid.size - 1),
        dt=dt,
        epsilon=epsilon,
    )

    def run_block(job: _Job) -> Dict[ProcessTag, np.ndarray]:
        nb = job.stop - job.start
        rng = block_stream(master_seed, stream, job.block)
        ids = np.arange(job.start, job.stop)
        state: Dict[ProcessTag, np.ndarray] = {}
        if ProcessTag.X_eps in tags:
            if x0_per_traj is not None:
                state[ProcessTag.X_eps] = np.array(x0_per_traj[job.start : job.stop], dtype=float)
            else:
                state[ProcessTag.X_eps] = np.tile(x0, (nb, 1))
        y_needed = ProcessTag.Y_fw in tags or ProcessTag.Y_eps in tags
        if y_needed:
            state[ProcessTag.Y_fw] = np.zeros((nb, field.dim))
        if ProcessTag.O_hom in tags:
            if o0 is None:
                state[ProcessTag.O_hom] = np.zeros((nb, field.dim))
            else:
                start = np.asarray(o0, dtype=float)
                state[ProcessTag.O_hom] = (
                    np.tile(start, (nb, 1)) if start.ndim == 1 else np.array(start[job.start : job.stop])
                )
        out: Dict[ProcessTag, np.ndarray] = {
            t: np.empty((len(outs), nb, field.dim)) for t in tags
        }

        def record(k: int) -> None:
            for j in slots.get(k, ()):
                for t in tags:
                    if t is ProcessTag.X_zero:
                        out[t][j] = flow[k]
                    elif t is ProcessTag.Y_eps:
                        out[t][j] = flow[k] + epsilon * state[ProcessTag.Y_fw]
                    else:
                        out[t][j] = state[t]

        record(0)
        for k in range(1, grid.size):
            h = grid[k] - grid[k - 1]
            inc = sample_increments(triplet, h, rng, nb)
            if ProcessTag.X_eps in tags:
                x = state[ProcessTag.X_eps]
                state[ProcessTag.X_eps] = x - h * field.eval(x) + epsilon * inc
            if y_needed:
                state[ProcessTag.Y_fw] = _linear_step(state[ProcessTag.Y_fw], flow_jac[k - 1], h, inc)
            if ProcessTag.O_hom in tags:
                state[ProcessTag.O_hom] = _linear_step(state[ProcessTag.O_hom], a0, h, inc)
            for t, s in state.items():
                finite = np.isfinite(s).all(axis=1)
                if not finite.all():
                    bad = int(ids[np.argmin(finite)])
                    logx.error(events.NONFINITE_STATE, process=t.value, trajectory_id=bad, step=k)
                    raise NonFiniteState(bad, k, t.value)
            record(k)
        if logx.every(PROGRESS_INTERVAL, f"sim:{stream}"):
            logx.debug(events.SIM_PROGRESS, block=job.block, n_blocks=len(jobs))
        return out

    jobs = [_Job(b, s, e) for b, s, e in blocks(n_traj, BLOCK_SIZE)]
    parts = WorkerPool(workers).map(run_block, jobs)

    result = SimulationResult(times=outs, epsilon=epsilon)
    ids = np.arange(n_traj)
    for t in tags:
        stacked = np.concatenate([p[t] for p in parts], axis=1)
        eps_tag = 0.0 if t in (ProcessTag.X_zero, ProcessTag.Y_fw, ProcessTag.O_hom) else epsilon
        result.batches[t] = [
            TrajectoryBatch(
                states=stacked[j],
                time=grid[out_idx[j]],
                epsilon=eps_tag,
                process_tag=t,
                trajectory_ids=ids,
                step=int(out_idx[j]),
            )
            for j in range(len(outs))
        ]
    logx.event(events.SIM_DONE, process=",".join(t.value for t in tags), n_traj=n_traj, n_steps=int(grid.size - 1))
    return result


def integrate_sde(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Sequence[float] | np.ndarray,
    epsilon: float,
    t_end: float,
    dt: Optional[float],
    n_traj: int,
    master_seed: int,
    output_times: Optional[Iterable[float]] = None,
    workers: Optional[int] = None,
) -> List[TrajectoryBatch]:
    """Euler-Maruyama ensemble of ``X_eps`` at the output times."""
    res = simulate(
        field, triplet, x0, epsilon, t_end, n_traj, master_seed,
        dt=dt, output_times=output_times, processes=(ProcessTag.X_eps,), workers=workers,
    )
    return res.get(ProcessTag.X_eps)


def integrate_fw_linearization(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Sequence[float] | np.ndarray,
    t_end: float,
    dt: Optional[float],
    n_traj: int,
    master_seed: int,
    output_times: Optional[Iterable[float]] = None,
    workers: Optional[int] = None,
) -> List[TrajectoryBatch]:
    """Linearisation along the deterministic flow, started at zero."""
    res = simulate(
        field, triplet, x0, 0.0, t_end, n_traj, master_seed,
        dt=dt, output_times=output_times, processes=(ProcessTag.Y_fw,), workers=workers,
    )
    return res.get(ProcessTag.Y_fw)


def integrate_ou(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    o0: Optional[np.ndarray],
    t_end: float,
    dt: Optional[float],
    n_traj: int,
    master_seed: int,
    output_times: Optional[Iterable[float]] = None,
    workers: Optional[int] = None,
    stream: str = "noise",
) -> List[TrajectoryBatch]:
    """Homogeneous OU process with the frozen Jacobian ``Db(0)``.

    ``o0`` is the start: ``None`` for zero, a ``(d,)`` vector, or an
    ``(n_traj, d)`` array such as draws from the stationary law.
    """
    res = simulate(
        field, triplet, np.zeros(field.dim), 0.0, t_end, n_traj, master_seed,
        dt=dt, output_times=output_times, processes=(ProcessTag.O_hom,), o0=o0,
        workers=workers, stream=stream,
    )
    return res.get(ProcessTag.O_hom)


def coupled_pair(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Sequence[float] | np.ndarray,
    epsilon: float,
    t_end: float,
    dt: Optional[float],
    n_traj: int,
    master_seed: int,
    output_times: Optional[Iterable[float]] = None,
    workers: Optional[int] = None,
) -> CoupledPair:
    res = simulate(
        field, triplet, x0, epsilon, t_end, n_traj, master_seed,
        dt=dt, output_times=output_times, processes=(ProcessTag.X_eps, ProcessTag.Y_eps),
        workers=workers,
    )
    return CoupledPair(x_eps=res.get(ProcessTag.X_eps), y_eps=res.get(ProcessTag.Y_eps), master_seed=master_seed)


@dataclass
class CoupledMoments:
    theta_p_moments: Dict[float, float]
    delta_p_moments: Dict[float, float]
    time: float
    epsilon: float

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "epsilon": self.epsilon,
            "theta_p_moments": {str(k): v for k, v in self.theta_p_moments.items()},
            "delta_p_moments": {str(k): v for k, v in self.delta_p_moments.items()},
        }


def coupled_difference(
    field: VectorFieldSpec,
    triplet: LevyTriplet,
    x0: Sequence[float] | np.ndarray,
    epsilon: float,
    t_end: float,
    dt: Optional[float],
    n_traj: int,
    master_seed: int,
    p_list: Sequence[float] = (2.0,),
    workers: Optional[int] = None,
) -> CoupledMoments:
    """``E|X_eps - X_zero|^p`` and ``E|X_eps - Y_eps|^p`` at ``t_end`` on shared noise."""
    res = simulate(
        field, triplet, x0, epsilon, t_end, n_traj, master_seed,
        dt=dt, processes=(ProcessTag.X_eps, ProcessTag.X_zero, ProcessTag.Y_eps), workers=workers,
    )
    x = res.final(ProcessTag.X_eps).states
    theta = np.linalg.norm(x - res.final(ProcessTag.X_zero).states, axis=1)
    delta = np.linalg.norm(x - res.final(ProcessTag.Y_eps).states, axis=1)
    return CoupledMoments(
        theta_p_moments={float(p): float(np.mean(theta**p)) for p in p_list},
        delta_p_moments={float(p): float(np.mean(delta**p)) for p in p_list},
        time=float(t_end),
        epsilon=float(epsilon),
    )


# ---------------------------------------------------------------------------
# Gaussian oracles
# ---------------------------------------------------------------------------


def stationary_covariance(A: np.ndarray, sigma_sqrt: np.ndarray) -> np.ndarray:
    """Solve ``A S + S A^T = Sigma`` for the unit-noise OU stationary covariance."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    s = np.atleast_2d(np.asarray(sigma_sqrt, dtype=float))
    if s.shape[0] != A.shape[0]:
        s = s.T
    q = s @ s.T
    cov = solve_continuous_lyapunov(A, q)
    return 0.5 * (cov + cov.T)


def ou_gaussian_law(
    A: np.ndarray,
    sigma_sqrt: np.ndarray,
    x0: Sequence[float] | np.ndarray,
    epsilon: float,
    t: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of ``dX = -A X dt + eps Sigma^{1/2} dB`` started at ``x0``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    s_inf = stationary_covariance(A, sigma_sqrt)
    prop = expm(-A * t)
    mean = prop @ np.asarray(x0, dtype=float).reshape(-1)
    cov = epsilon**2 * (s_inf - prop @ s_inf @ prop.T)
    return mean, 0.5 * (cov + cov.T)


__all__ = [
    "ProcessTag",
    "TrajectoryBatch",
    "CoupledPair",
    "CoupledMoments",
    "DeterministicPath",
    "SimulationResult",
    "default_dt",
    "check_dt",
    "time_grid",
    "rk4_step",
    "integrate_deterministic",
    "simulate",
    "integrate_sde",
    "integrate_fw_linearization",
    "integrate_ou",
    "coupled_pair",
    "coupled_difference",
    "stationary_covariance",
    "ou_gaussian_law",
]
