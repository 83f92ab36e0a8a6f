import math

import numpy as np
import pytest

from core.errors import InsufficientSignal, MomentOrderInvalid, NoProfile
from modules import cutoff_experiments
from modules.cutoff_experiments import (
    INVARIANT_THIN_FACTOR,
    CurveEntry,
    CutoffCurve,
    CutoffSchedule,
    InvariantMethod,
    collapse_check,
    cutoff_curve,
    decay_slope,
    ergodic_decay_check,
    estimate_invariant_measure,
    fw_error_decay,
    gaussian_ou_ratio,
    linearization_relaxation,
    moment_scaling,
    moments_cutoff,
    monotone_window,
    profile_constancy_check,
    profile_fit,
    ratio_scale,
    shifted_ou_distance,
    stationary_ou_cloud,
    theoretical_profile,
    window_only_evidence,
)
from modules.levy_noise import alpha_stable
from modules.spectral import CutoffParams, cutoff_time, linear_cutoff_params, nonlinear_cutoff_params
from modules.vector_fields import OscillatorParams, linear_field, oscillator_field
from modules.wasserstein import EmpiricalMeasure


def _curve(values, stderr=0.001, w=1.0, p=2.0):
    """values: {epsilon: {r: ratio}}"""
    entries = [
        CurveEntry(epsilon=eps, r=r, t=cutoff_time(1.0, 1, eps) + r * w, wp_ratio=v, stderr=stderr)
        for eps, row in values.items()
        for r, v in row.items()
    ]
    return CutoffCurve(entries=entries, p=p, w=w)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(epsilons=[], r_grid=[0.0]),
        dict(epsilons=[0.1, 0.2], r_grid=[0.0]),
        dict(epsilons=[1.5], r_grid=[0.0]),
        dict(epsilons=[0.1], r_grid=[]),
        dict(epsilons=[0.1], r_grid=[0.0], w=0.0),
        dict(epsilons=[0.1], r_grid=[0.0], p=0.0),
    ],
)
def test_schedule_validation(kwargs):
    with pytest.raises(ValueError):
        CutoffSchedule(**kwargs)


def test_schedule_noise_and_times():
    schedule = CutoffSchedule(epsilons=[0.1, 0.01], r_grid=[0.0], p=2.0)
    with pytest.raises(MomentOrderInvalid):
        schedule.check_noise(alpha_stable(1, alpha=1.5))
    assert schedule.cutoff_times(1.0, 1) == pytest.approx([math.log(10.0), math.log(100.0)])


def test_ratio_scale():
    assert ratio_scale(0.1, 2.0) == pytest.approx(0.1)
    assert ratio_scale(0.1, 0.5) == pytest.approx(0.1**0.5)


def test_gaussian_ratio_at_time_zero():
    eps = 0.1
    assert gaussian_ou_ratio([[1.0]], [[1.0]], [1.0], eps, 0.0) == pytest.approx(math.sqrt(1 + eps**2 / 2) / eps)


@pytest.mark.parametrize("r", [-1.0, 0.0, 1.5])
def test_gaussian_ratio_matches_profile_for_small_noise(r):
    A = np.diag([1.0, 2.0])
    params = linear_cutoff_params(A, [1.0, 1.0])
    theory = theoretical_profile(params, 2.0, 1.0, [r])[0]["profile"]
    assert theory == pytest.approx(math.exp(-r))
    eps = 1e-4
    oracle = gaussian_ou_ratio(A, np.eye(2), [1.0, 1.0], eps, cutoff_time(1.0, 1, eps) + r)
    assert oracle == pytest.approx(theory, rel=1e-3)


def test_profile_refused_for_ellipse():
    v = np.array([0.5, -0.25j])
    params = CutoffParams(q=1.0, ell=1, m=2, thetas=[1.0, -1.0], vs=[v, np.conj(v)])
    with pytest.raises(NoProfile):
        theoretical_profile(params, 2.0, 1.0, [0.0])


def test_profile_below_one_needs_a_cloud():
    params = linear_cutoff_params(np.eye(1), [1.0])
    with pytest.raises(ValueError):
        theoretical_profile(params, 0.5, 1.0, [0.0])


def test_profile_below_one_by_monte_carlo(identity1, bm1):
    params = linear_cutoff_params(np.eye(1), [1.0])
    cloud = stationary_ou_cloud(identity1, bm1, n=2000, seed=1)
    rows = theoretical_profile(params, 0.5, 1.0, [-1.0, 2.0], ou_cloud=cloud)
    assert [r["r"] for r in rows] == [-1.0, 2.0]
    assert rows[0]["profile"] > rows[1]["profile"]
    assert all(r["stderr"] > 0 for r in rows)


def test_invariant_measure_guards_and_methods(identity1, bm1):
    with pytest.raises(ValueError):
        estimate_invariant_measure(identity1, bm1, 0.1, horizon=5.0)
    ens = estimate_invariant_measure(identity1, bm1, 0.5, n=2000, seed=2)
    assert ens.n == 2000
    assert np.var(ens.points) == pytest.approx(0.125, rel=0.1)
    run = estimate_invariant_measure(identity1, bm1, 0.5, method=InvariantMethod.long_run, n=50, seed=2)
    assert (run.n, run.dim) == (50, 1)


def test_profile_fit_recovers_rate():
    curve = _curve({0.01: {r: 2.0 * math.exp(-1.5 * r) for r in (-1.0, 0.0, 1.0, 2.0, 3.0)}})
    fit = profile_fit(curve)
    assert fit.q_hat == pytest.approx(1.5)
    assert fit.c_hat == pytest.approx(2.0)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.n_points == 5


def test_profile_fit_needs_signal():
    curve = _curve({0.01: {r: 1e-4 for r in (0.0, 1.0, 2.0, 3.0)}})
    with pytest.raises(InsufficientSignal):
        profile_fit(curve)


def test_collapse_and_window_evidence():
    steady = _curve({0.1: {0.0: 1.0, 1.0: 0.37}, 0.05: {0.0: 1.001, 1.0: 0.371}, 0.02: {0.0: 1.0, 1.0: 0.37}})
    report = collapse_check(steady)
    assert report.passed
    assert report.epsilons == (0.05, 0.02)
    assert not window_only_evidence(steady).oscillating

    swinging = _curve({0.1: {0.0: 1.0}, 0.05: {0.0: 0.6}, 0.02: {0.0: 1.0}})
    evidence = window_only_evidence(swinging)
    assert evidence.oscillating
    assert evidence.r == 0.0
    assert evidence.gap == pytest.approx(0.4)
    assert not collapse_check(swinging).passed

    with pytest.raises(InsufficientSignal):
        collapse_check(_curve({0.1: {0.0: 1.0}}))


def test_monotone_window():
    assert monotone_window(_curve({0.01: {0.0: 1.0, 1.0: 0.5, 2.0: 0.2}}))
    assert not monotone_window(_curve({0.01: {0.0: 1.0, 1.0: 0.5, 2.0: 0.9}}))


def test_decay_slope():
    t = np.linspace(0.0, 3.0, 7)
    assert decay_slope(t, 10.0 * np.exp(-2.0 * t) + 1e-6) == pytest.approx(-2.0, abs=0.05)
    assert decay_slope([0.0, 1.0], [1.0, 0.5]) is None


def test_ergodic_decay_within_contraction_bound(identity1, bm1):
    report = ergodic_decay_check(identity1, bm1, 0.1, [2.0], 2.0, [0.5, 1.0, 2.0, 3.0], n=512, seed=3)
    assert len(report.rows) == 4
    assert report.expected_slope == pytest.approx(-1.0)
    assert report.passed, report.rows
    with pytest.raises(MomentOrderInvalid):
        ergodic_decay_check(identity1, alpha_stable(1, alpha=1.5), 0.1, [1.0], 2.0, [1.0])


def test_cutoff_curve_tracks_gaussian_oracle(identity1, bm1):
    params = linear_cutoff_params(np.eye(1), [1.0])
    schedule = CutoffSchedule(epsilons=[0.1, 0.05], r_grid=[-10.0, -1.0, 0.0, 1.0], p=2.0)
    curve = cutoff_curve(identity1, bm1, [1.0], schedule, params, n=512, seed=4, dt=0.002)
    # t < 0 at r = -10 for both noise levels
    assert all(e.r != -10.0 for e in curve.entries)
    assert len(curve.entries) == 6
    assert curve.verdict.granted is True
    for e in curve.entries:
        oracle = gaussian_ou_ratio([[1.0]], [[1.0]], [1.0], e.epsilon, e.t)
        assert e.wp_ratio == pytest.approx(oracle, abs=0.1 + 4 * e.stderr)
        assert e.theory == pytest.approx(math.exp(-e.r))


def test_cutoff_curve_rejects_zero_start(identity1, bm1):
    params = linear_cutoff_params(np.eye(1), [1.0])
    with pytest.raises(ValueError):
        cutoff_curve(identity1, bm1, [0.0], CutoffSchedule([0.1], [0.0]), params, n=16)


@pytest.mark.slow
def test_moment_scaling_slope(fput1, bm1):
    report = moment_scaling(fput1, bm1, [1.0], (0.1, 0.05, 0.025), t=1.0, p=2.0, n=4000, seed=5, dt=0.01)
    assert report.slope == pytest.approx(2.0, abs=0.1)
    assert len(report.rows) == 3


def test_long_run_samples_are_thinned(monkeypatch, bm1):
    seen = {}
    real = cutoff_experiments.simulate

    def spy(*args, **kwargs):
        seen["outs"] = np.asarray(kwargs["output_times"], dtype=float)
        return real(*args, **kwargs)

    monkeypatch.setattr(cutoff_experiments, "simulate", spy)
    field = linear_field([[4.0]])
    cloud = estimate_invariant_measure(field, bm1, 0.5, method=InvariantMethod.long_run, n=6, seed=1)
    assert cloud.n == 6
    assert seen["outs"][0] == pytest.approx(20.0 / 4.0)
    assert np.diff(seen["outs"]) == pytest.approx(np.full(5, 0.5))
    assert INVARIANT_THIN_FACTOR == 2.0


@pytest.mark.parametrize("dim", [1, 2])
def test_shift_adds_in_quadrature_on_aligned_halves(rng, dim):
    cloud = EmpiricalMeasure(rng.normal(0.3, 0.7, size=(300, dim)))
    base = shifted_ou_distance(np.zeros(dim), cloud, 2.0).value
    for u in (0.5, -1.5):
        shift = np.full(dim, u)
        est = shifted_ou_distance(shift, cloud, 2.0)
        assert est.value**2 == pytest.approx(float(shift @ shift) + base**2, rel=1e-9)


def test_profile_constancy_on_circle_and_ellipse(rng):
    cloud = EmpiricalMeasure(rng.normal(scale=math.sqrt(0.5), size=(400, 2)))
    circle = CutoffParams(q=1.0, ell=1, m=2, thetas=[1.0, -1.0], vs=[np.array([0.5, -0.5j]), np.array([0.5, 0.5j])])
    report = profile_constancy_check(circle, 2.0, cloud)
    assert report.constant
    assert len(report.values) == 6
    assert report.values == pytest.approx([report.values[0]] * 6, rel=1e-9)

    ellipse = CutoffParams(
        q=1.0, ell=1, m=2, thetas=[1.0, -1.0], vs=[np.array([0.5, -0.25j]), np.array([0.5, 0.25j])]
    )
    report = profile_constancy_check(ellipse, 2.0, cloud)
    assert not report.constant
    assert max(report.values) - min(report.values) > 0.2


def test_moments_follow_the_gaussian_law(identity1, bm1):
    params = linear_cutoff_params(np.eye(1), [1.0])
    schedule = CutoffSchedule(epsilons=[0.1], r_grid=[0.0, 1.0], p=2.0)
    report = moments_cutoff(identity1, bm1, [1.0], schedule, params, n=4000, seed=6, dt=0.001)
    assert [r["r"] for r in report.rows] == [0.0, 1.0]
    for row in report.rows:
        decay = math.exp(-2 * row["t"])
        expected = decay / 0.01 + (1 - decay) / 2
        assert row["moment_ratio"] == pytest.approx(expected, abs=0.01 + 4 * row["stderr"])
    assert report.plateau == pytest.approx(0.5, abs=0.01 + 4 * report.plateau_stderr)


def test_fw_error_decays_with_noise(fput1, bm1):
    params = linear_cutoff_params(np.eye(1), [1.0])
    schedule = CutoffSchedule(epsilons=[0.1, 0.05, 0.025], r_grid=[0.0], p=2.0)
    report = fw_error_decay(fput1, bm1, [1.0], schedule, params, n=512, seed=7, dt=0.01)
    assert [r["t"] for r in report.rows] == pytest.approx([math.log(1 / e) for e in schedule.epsilons])
    xy = [r["wp_xy_over_eps"] for r in report.rows]
    assert xy[-1] < 0.5 * xy[0]
    assert report.decreasing
    assert report.to_dict()["decreasing"] is True


def test_fw_error_vanishes_for_linear_drift(identity1, bm1):
    params = linear_cutoff_params(np.eye(1), [1.0])
    schedule = CutoffSchedule(epsilons=[0.1, 0.05], r_grid=[0.0], p=2.0)
    report = fw_error_decay(identity1, bm1, [1.0], schedule, params, n=256, seed=8, dt=0.01)
    assert all(r["wp_xy_over_eps"] < 1e-9 for r in report.rows)
    for r in report.rows:
        assert r["wp_mu_over_eps"] <= 0.1 + 4 * r["wp_mu_stderr"]


def test_linearization_relaxes_to_stationary_law(identity1, bm1):
    rows = linearization_relaxation(identity1, bm1, [1.0], [3.0, 0.25], p=2.0, n=2048, seed=9, dt=0.005)
    assert [r["t"] for r in rows] == [0.25, 3.0]
    # Gaussian W2 between N(0, (1 - e^{-2t}) / 2) and N(0, 1 / 2)
    expected = math.sqrt(0.5) * (1 - math.sqrt(1 - math.exp(-0.5)))
    assert rows[0]["wp"] == pytest.approx(expected, abs=0.03 + 4 * rows[0]["stderr"])
    assert rows[1]["wp"] < rows[0]["wp"] / 4


@pytest.mark.slow
def test_cutoff_curve_within_five_percent_of_gaussian_oracle(identity1, bm1):
    params = linear_cutoff_params(np.eye(1), [1.0])
    schedule = CutoffSchedule(epsilons=[0.05, 0.025], r_grid=[-1.0, 0.0, 1.0], p=2.0)
    curve = cutoff_curve(identity1, bm1, [1.0], schedule, params, n=32768, seed=10, dt=0.002)
    assert len(curve.entries) == 6
    for e in curve.entries:
        oracle = gaussian_ou_ratio([[1.0]], [[1.0]], [1.0], e.epsilon, e.t)
        assert e.wp_ratio == pytest.approx(oracle, rel=0.05)


@pytest.mark.slow
def test_fput_profile_cutoff(fput1, bm1):
    schedule = CutoffSchedule(epsilons=[0.05, 0.025], r_grid=[-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0], p=2.0)
    params = nonlinear_cutoff_params(fput1, [1.0])
    curve = cutoff_curve(fput1, bm1, [1.0], schedule, params, n=4096, seed=11, dt=0.005)
    assert curve.verdict.granted is True
    assert profile_fit(curve).q_hat == pytest.approx(1.0, abs=0.1)
    assert collapse_check(curve, r_values=[0.0, 1.0, 2.0, 3.0, 4.0]).passed
    assert monotone_window(curve)
    # the flow is entered at a finite radius, so the profile carries a small bias
    for e in curve.at(0.025):
        if e.r >= 0:
            assert abs(e.wp_ratio - e.theory) <= 3 * e.stderr + 0.02 * e.theory


@pytest.mark.slow
def test_oscillator_dichotomy(bm2):
    circle = oscillator_field(OscillatorParams(1.0, 1.0, 0.0, 2.0))
    schedule = CutoffSchedule(epsilons=[0.05, 0.025], r_grid=[0.0, 1.0, 2.0], p=2.0)
    params = nonlinear_cutoff_params(circle, [1.0, 0.0])
    curve = cutoff_curve(circle, bm2, [1.0, 0.0], schedule, params, n=1024, seed=12, dt=0.005)
    assert curve.verdict.granted is True
    # exact assignment stderr leaves out the sample-mean mismatch of the two clouds
    for e in curve.at(0.025):
        assert abs(e.wp_ratio - e.theory) <= 3 * e.stderr + 0.06

    ellipse = oscillator_field(OscillatorParams(1.0, 2.0, 0.0, 2.0))
    schedule = CutoffSchedule(epsilons=[0.1, 0.05, 0.025], r_grid=[0.0, 1.0], p=2.0)
    params = nonlinear_cutoff_params(ellipse, [1.0, 0.0])
    curve = cutoff_curve(ellipse, bm2, [1.0, 0.0], schedule, params, n=1024, seed=13, dt=0.005)
    assert curve.verdict.granted is False
    assert curve.theory == []
    assert window_only_evidence(curve).oscillating


@pytest.mark.slow
def test_stable_noise_keeps_shift_linearity(identity1):
    noise = alpha_stable(1, alpha=1.5)
    params = linear_cutoff_params(np.eye(1), [1.0])
    schedule = CutoffSchedule(epsilons=[0.025], r_grid=[0.0, 1.0, 2.0], p=1.0)
    curve = cutoff_curve(identity1, noise, [1.0], schedule, params, n=16384, seed=14)
    for e in curve.entries:
        assert e.theory == pytest.approx(math.exp(-e.r))
        assert abs(e.wp_ratio - e.theory) <= 0.1 * e.theory + 3 * e.stderr
