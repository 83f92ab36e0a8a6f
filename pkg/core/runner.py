"""Subcommand registry and the ``run`` entry point.

Each subcommand stages its artifacts in an :class:`utils.io.ArtifactSet`;
``run`` adds the manifest and commits everything at once, so either all
files of a run appear or none do.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np
from loguru import logger

from config.constants import ARTIFACT_VERSION, SCHEMA_VERSION
from config.storage import config_hash
from core import events
from core.config import get_settings
from core.errors import CutoffLabError, InsufficientSignal, to_exit_code
from modules.cutoff_experiments import (
    CutoffSchedule,
    collapse_check,
    cutoff_curve,
    ergodic_decay_check,
    fw_error_decay,
    moments_cutoff,
    monotone_window,
    profile_fit,
    window_only_evidence,
)
from modules.levy_noise import LevyTriplet, triplet_from_config
from modules.sde_sim import ProcessTag, check_dt, simulate
from modules.spectral import CutoffParams, cutoff_time, kappa, nonlinear_cutoff_params, profile_verdict
from modules.vector_fields import VectorFieldSpec, build_field, check_dissipativity
from modules.wasserstein import WpMethod, read_samples, wp_assignment, wp_estimate, wp_exact_1d, wp_sliced
from modules.wp_properties import property_suite
from schemas.experiment import ExperimentConfig
from utils import logx
from utils.io import ArtifactSet

logger = logger.bind(module="runner")

Handler = Callable[["RunContext"], Optional[int]]
SUBCOMMAND_HANDLERS: "OrderedDict[str, Handler]" = OrderedDict()


def register(name: str) -> Callable[[Handler], Handler]:
    """Register a subcommand handler under ``name``."""

    def decorator(fn: Handler) -> Handler:
        SUBCOMMAND_HANDLERS[name] = fn
        return fn

    return decorator


@dataclass
class RunContext:
    cfg: ExperimentConfig
    subcommand: str
    artifacts: ArtifactSet
    workers: Optional[int] = None
    extra: Dict[str, Any] = field(default_factory=dict)
    _field: Optional[VectorFieldSpec] = None
    _params: Optional[CutoffParams] = None

    @property
    def field(self) -> VectorFieldSpec:
        if self._field is None:
            self._field = build_field(self.cfg.field.name.value, **self.cfg.field.builder_kwargs())
            if self.cfg.dt is not None:
                check_dt(self.cfg.dt, self._field.delta)
        return self._field

    @property
    def triplet(self) -> LevyTriplet:
        return triplet_from_config(self.cfg.noise.as_mapping(), self.field.dim)

    @property
    def x0(self) -> np.ndarray:
        return np.asarray(self.cfg.x0, dtype=float)

    @property
    def schedule(self) -> CutoffSchedule:
        s = self.cfg.schedule
        return CutoffSchedule(epsilons=list(s.epsilons), r_grid=list(s.r_grid), w=s.w, p=s.p)

    @property
    def params(self) -> CutoffParams:
        if self._params is None:
            self._params = nonlinear_cutoff_params(self.field, self.x0)
        return self._params

    @property
    def seed(self) -> int:
        return self.cfg.master_seed


def resolve_output_dir(cfg: ExperimentConfig) -> Path:
    env = get_settings().output_dir
    return Path(env if env else cfg.output_dir)


def build_manifest(ctx: RunContext) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": ARTIFACT_VERSION,
        "subcommand": ctx.subcommand,
        "config": ctx.cfg.model_dump(mode="json"),
        "config_hash": config_hash(ctx.cfg),
        "master_seed": ctx.seed,
        "extra": {k: str(v) for k, v in sorted(ctx.extra.items())},
        "artifacts": ctx.artifacts.digests(),
    }


def run(
    cfg: ExperimentConfig,
    subcommand: str,
    extra: Optional[Dict[str, Any]] = None,
    workers: Optional[int] = None,
) -> int:
    """Execute ``subcommand`` and commit its artifacts; returns the exit status."""
    if subcommand not in SUBCOMMAND_HANDLERS:
        raise ValueError(f"unknown subcommand {subcommand!r}; expected one of {list(SUBCOMMAND_HANDLERS)}")
    out_dir = resolve_output_dir(cfg)
    ctx = RunContext(
        cfg=cfg,
        subcommand=subcommand,
        artifacts=ArtifactSet(out_dir),
        workers=workers if workers is not None else get_settings().workers,
        extra=dict(extra or {}),
    )
    digest = config_hash(cfg)
    logx.event(events.RUN_START, subcommand=subcommand, config_hash=digest, output_dir=str(out_dir))
    try:
        status = SUBCOMMAND_HANDLERS[subcommand](ctx) or 0
        ctx.artifacts.add_json("manifest.json", build_manifest(ctx))
        ctx.artifacts.commit()
    except CutoffLabError as exc:
        code = to_exit_code(exc)
        logx.error(events.RUN_FAILED, subcommand=subcommand, error=type(exc).__name__, detail=str(exc), exit_code=code)
        return code
    except Exception as exc:
        logger.exception("subcommand {} crashed", subcommand)
        logx.error(events.RUN_FAILED, subcommand=subcommand, error=type(exc).__name__, detail=str(exc), exit_code=1)
        return 1
    logx.event(events.RUN_DONE, subcommand=subcommand, exit_code=status)
    return status


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _verdict_payload(ctx: RunContext) -> Dict[str, Any]:
    params = ctx.params
    verdict = profile_verdict(params, ctx.cfg.schedule.p)
    diss = check_dissipativity(ctx.field, seed=ctx.seed)
    return {
        "schema_version": SCHEMA_VERSION,
        "field": ctx.field.name,
        "params": params.to_dict(),
        "verdict": verdict.to_dict(),
        "dissipativity": diss.to_dict(),
        "cutoff_times": [
            {"epsilon": e, "t": cutoff_time(params.q, params.ell, e)} for e in ctx.cfg.schedule.epsilons
        ],
    }


@register("spectral")
def _spectral(ctx: RunContext) -> int:
    payload = _verdict_payload(ctx)
    ctx.artifacts.add_json("verdict.json", payload)
    logger.info("spectral: q={} ell={} m={}", ctx.params.q, ctx.params.ell, ctx.params.m)
    return 0


@register("simulate")
def _simulate(ctx: RunContext) -> int:
    cfg = ctx.cfg
    eps = cfg.schedule.epsilons[0]
    times = sorted(set(t for t in cfg.time_grid if t <= cfg.t_end) | {cfg.t_end})
    res = simulate(
        ctx.field, ctx.triplet, ctx.x0, eps, cfg.t_end, cfg.n_traj, ctx.seed,
        dt=cfg.dt, output_times=times, processes=(ProcessTag.X_eps,), workers=ctx.workers,
    )
    d = ctx.field.dim
    rows = []
    moments = []
    p = cfg.schedule.p
    for batch in res.get(ProcessTag.X_eps):
        for tid, state in zip(batch.trajectory_ids, batch.states):
            rows.append([batch.time, int(tid), *[float(v) for v in state]])
        norms = np.linalg.norm(batch.states, axis=1)
        moments.append(
            {
                "t": batch.time,
                "mean": batch.states.mean(axis=0).tolist(),
                "p": p,
                "moment_p": float(np.mean(norms**p)),
                "moment_p_over_eps_p": float(np.mean(norms**p)) / eps**p,
            }
        )
    ctx.artifacts.add_csv("trajectories.csv", ["time", "trajectory_id", *[f"x{i}" for i in range(d)]], rows)
    ctx.artifacts.add_json("moments.json", {"epsilon": eps, "n_traj": cfg.n_traj, "moments": moments})
    return 0


@register("wasserstein")
def _wasserstein(ctx: RunContext) -> int:
    extra = ctx.extra
    mu1 = read_samples(extra["samples_a"])
    mu2 = read_samples(extra["samples_b"])
    p = float(extra.get("p", ctx.cfg.schedule.p))
    method = WpMethod(extra.get("method", ctx.cfg.estimator.method.value))
    seed = int(extra.get("seed", ctx.seed))
    directions = int(extra.get("directions", ctx.cfg.estimator.n_directions))
    if method is WpMethod.exact_1d:
        res = wp_exact_1d(mu1, mu2, p)
    elif method is WpMethod.assignment:
        res = wp_assignment(mu1, mu2, p)
    elif method is WpMethod.sliced:
        res = wp_sliced(mu1, mu2, p, n_directions=directions, seed=seed)
    else:
        res = wp_estimate(mu1, mu2, p, cap=ctx.cfg.estimator.cap, reps=ctx.cfg.estimator.reps, seed=seed)
    ctx.artifacts.add_json("wasserstein.json", res.to_dict())
    return 0


@register("properties")
def _properties(ctx: RunContext) -> int:
    report = property_suite(n=ctx.cfg.properties_n, seed=ctx.seed)
    ctx.artifacts.add_json("properties.json", report.to_dict())
    if not report.all_passed:
        logger.warning("{} property checks failed", len(report.failures()))
        return 4
    return 0


@register("ergodic")
def _ergodic(ctx: RunContext) -> int:
    cfg = ctx.cfg
    report = ergodic_decay_check(
        ctx.field, ctx.triplet, cfg.schedule.epsilons[0], ctx.x0, cfg.schedule.p, cfg.time_grid,
        n=cfg.n_traj, seed=ctx.seed, dt=cfg.dt, workers=ctx.workers,
    )
    ctx.artifacts.add_json("ergodic.json", report.to_dict())
    ctx.artifacts.add_csv(
        "ergodic.csv",
        ["t", "wp", "stderr", "bound", "pass"],
        ([r["t"], r["wp"], r["stderr"], r["bound"], int(r["pass"])] for r in report.rows),
    )
    return 0 if report.passed else 4


@register("cutoff")
def _cutoff(ctx: RunContext) -> int:
    cfg = ctx.cfg
    params = ctx.params
    verdict = profile_verdict(params, cfg.schedule.p)
    curve = cutoff_curve(
        ctx.field, ctx.triplet, ctx.x0, ctx.schedule, params,
        n=cfg.n_traj, seed=ctx.seed, dt=cfg.dt, workers=ctx.workers,
        verdict=verdict, invariant_method=cfg.invariant_method,
    )
    ctx.artifacts.add_csv(
        "curve.csv",
        ["epsilon", "r", "t", "wp_ratio", "stderr", "theory"],
        ([e.epsilon, e.r, e.t, e.wp_ratio, e.stderr, e.theory] for e in curve.entries),
    )
    payload = _verdict_payload(ctx)
    failures = []
    try:
        fit = profile_fit(curve)
        payload["fit"] = fit.to_dict()
        if curve.theory and cfg.schedule.p >= 1:
            payload["fit"]["c_theory"] = float(kappa(params, 0.0, cfg.schedule.w)) * verdict.omega.radius
    except InsufficientSignal as exc:
        payload["fit"] = {"error": str(exc)}
        failures.append("fit")
    payload["monotone"] = monotone_window(curve)
    if not payload["monotone"]:
        failures.append("monotone")
    if len(curve.epsilons) >= 2:
        collapse = collapse_check(curve)
        evidence = window_only_evidence(curve)
        payload["collapse"] = collapse.to_dict()
        payload["window_evidence"] = evidence.to_dict()
        # the measured curve has to back the verdict it was run under
        if verdict.granted is True and not collapse.passed:
            failures.append("collapse")
        if verdict.granted is False and not evidence.oscillating:
            failures.append("oscillation")
    payload["theory"] = curve.theory
    payload["failures"] = failures
    ctx.artifacts.add_json("verdict.json", payload)
    if failures:
        logger.warning("cutoff: curve disagrees with the verdict on {}", ", ".join(failures))
        return 4
    return 0


@register("moments")
def _moments(ctx: RunContext) -> int:
    cfg = ctx.cfg
    report = moments_cutoff(
        ctx.field, ctx.triplet, ctx.x0, ctx.schedule, ctx.params,
        n=cfg.n_traj, seed=ctx.seed, dt=cfg.dt, workers=ctx.workers,
    )
    ctx.artifacts.add_json("moments.json", report.to_dict())
    ctx.artifacts.add_csv(
        "moments.csv",
        ["epsilon", "r", "t", "moment_ratio", "stderr"],
        ([r["epsilon"], r["r"], r["t"], r["moment_ratio"], r["stderr"]] for r in report.rows),
    )
    return 0


@register("fw-error")
def _fw_error(ctx: RunContext) -> int:
    cfg = ctx.cfg
    report = fw_error_decay(
        ctx.field, ctx.triplet, ctx.x0, ctx.schedule, ctx.params,
        n=cfg.n_traj, seed=ctx.seed, dt=cfg.dt, workers=ctx.workers,
    )
    ctx.artifacts.add_json("fw_error.json", report.to_dict())
    return 0


__all__ = [
    "RunContext",
    "SUBCOMMAND_HANDLERS",
    "register",
    "run",
    "build_manifest",
    "resolve_output_dir",
]
