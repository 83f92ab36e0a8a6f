import math

import numpy as np
import pytest
from scipy import stats

from core.errors import DimensionMismatch, NonFiniteState, StepSizeTooLarge
from modules.levy_noise import brownian
from modules.sde_sim import (
    ProcessTag,
    TrajectoryBatch,
    coupled_difference,
    coupled_pair,
    integrate_deterministic,
    integrate_fw_linearization,
    integrate_ou,
    integrate_sde,
    ou_gaussian_law,
    simulate,
    stationary_covariance,
    time_grid,
)
from modules.vector_fields import OscillatorParams, linear_field, oscillator_field


def test_time_grid_contains_output_times():
    grid = time_grid(1.0, 0.3, [0.5])
    assert grid == pytest.approx([0.0, 0.3, 0.5, 0.6, 0.9, 1.0])
    with pytest.raises(ValueError):
        time_grid(1.0, 0.1, [1.5])


def test_deterministic_linear_flow(identity1):
    path = integrate_deterministic(identity1, [1.0], t_end=1.0, dt=1e-3)
    assert path.final[0] == pytest.approx(math.exp(-1.0), abs=1e-8)


def test_deterministic_fput_closed_form(fput1):
    path = integrate_deterministic(fput1, [1.0], t_end=1.0, dt=1e-3, output_times=[0.5])
    for t in (0.5, 1.0):
        e = math.exp(-2 * t)
        exact = math.sqrt(e / (1 + (1 - e)))
        assert path.at(t)[0] == pytest.approx(exact, abs=1e-6)


def test_deterministic_fixed_point(fput2):
    path = integrate_deterministic(fput2, [0.0, 0.0], t_end=2.0, dt=0.01)
    assert np.all(path.states == 0.0)


def test_zero_noise_matches_deterministic_flow(identity1, fput1, bm1):
    dt = 1e-3
    for spec in (identity1, fput1):
        det = integrate_deterministic(spec, [1.0], t_end=1.0, dt=dt).final[0]
        batches = integrate_sde(spec, bm1, [1.0], 0.0, 1.0, dt, n_traj=3, master_seed=0)
        final = batches[-1].states[:, 0]
        assert np.all(final == final[0])
        # first-order Euler against RK4
        assert final == pytest.approx(det, rel=5 * dt)
    euler = integrate_sde(identity1, bm1, [1.0], 0.0, 1.0, dt, n_traj=1, master_seed=0)[-1]
    assert euler.states[0, 0] == pytest.approx((1 - dt) ** 1000, rel=1e-9)


def test_scalar_ou_variance(identity1, bm1):
    eps, t, n = 0.5, 1.0, 100_000
    batch = integrate_sde(identity1, bm1, [0.0], eps, t, None, n_traj=n, master_seed=1)[-1]
    expected = eps**2 * (1 - math.exp(-2 * t)) / 2
    assert batch.states[:, 0].var() == pytest.approx(expected, rel=0.03)


def test_degenerate_noise_reaches_first_coordinate():
    spec = oscillator_field(OscillatorParams(1.0, 1.0, 0.0, 2.0))
    noise = brownian(2, projection=[0.0, 1.0])
    t = 0.05
    batch = integrate_sde(spec, noise, [0.0, 0.0], 1.0, t, 0.01, n_traj=4000, master_seed=2)[-1]
    v0, v1 = batch.states.var(axis=0)
    assert 0.0 < v0 < 0.1 * t
    assert v1 == pytest.approx(t, rel=0.2)


def test_linearization_at_origin_is_ou_pathwise(fput2, bm2):
    res = simulate(
        fput2, bm2, [0.0, 0.0], 0.1, 2.0, 50, 3, dt=0.01,
        output_times=[0.5, 1.0, 2.0], processes=(ProcessTag.Y_fw, ProcessTag.O_hom),
    )
    for y, o in zip(res.get(ProcessTag.Y_fw), res.get(ProcessTag.O_hom)):
        assert np.array_equal(y.states, o.states)


def test_linear_field_linearization_is_ou_for_any_start(bm2):
    spec = linear_field([[1.0, 0.5], [0.0, 2.0]])
    res = simulate(
        spec, bm2, [1.0, -2.0], 0.1, 1.0, 20, 4, dt=0.01, processes=(ProcessTag.Y_fw, ProcessTag.O_hom)
    )
    assert np.array_equal(res.final(ProcessTag.Y_fw).states, res.final(ProcessTag.O_hom).states)


def test_fw_linearization_variance_fput(fput1, bm1):
    dt, t_end, n = 0.01, 1.0, 100_000
    batch = integrate_fw_linearization(fput1, bm1, [1.0], t_end, dt, n_traj=n, master_seed=5)[-1]
    assert batch.process_tag is ProcessTag.Y_fw
    # exact variance of the discretized scheme along the Euler flow
    x, v = 1.0, 0.0
    for _ in range(int(round(t_end / dt))):
        jac = 1.0 + 3.0 * x**2
        v = (1.0 - dt * jac) ** 2 * v + dt
        x = x - dt * x * (1.0 + x**2)
    assert batch.states[:, 0].var() == pytest.approx(v, rel=0.03)


@pytest.mark.slow
def test_ou_stationary_covariance():
    q = 2.0
    spec = linear_field(q * np.eye(2))
    batch = integrate_ou(spec, brownian(2), None, 10.0 / q, None, n_traj=100_000, master_seed=6)[-1]
    cov = np.cov(batch.states.T)
    target = stationary_covariance(spec.linearization(), np.eye(2))
    assert np.allclose(target, np.eye(2) / (2 * q))
    assert np.diag(cov) == pytest.approx(np.diag(target), rel=0.03)
    assert abs(cov[0, 1]) < 0.01


def test_ou_started_in_stationary_law_stays_put(identity1, bm1):
    q, dt, n = 1.0, 0.01, 20_000
    # stationary variance of the Euler scheme
    var = dt / (1.0 - (1.0 - q * dt) ** 2)
    start = math.sqrt(var) * np.random.default_rng(0).standard_normal((n, 1))
    batches = integrate_ou(identity1, bm1, start, 10.0, dt, n, master_seed=7, output_times=[5.0, 10.0])
    ks = stats.ks_2samp(batches[0].states[:, 0], batches[1].states[:, 0])
    assert ks.pvalue > 1e-3


def test_synchronous_coupling_contracts(fput1, bm1):
    dt = 0.01
    times = [0.5, 1.0, 2.0]
    a = integrate_sde(fput1, bm1, [0.5], 0.2, 2.0, dt, 500, 8, output_times=times)
    b = integrate_sde(fput1, bm1, [-0.5], 0.2, 2.0, dt, 500, 8, output_times=times)
    for ba, bb in zip(a, b):
        gap = np.abs(ba.states - bb.states)[:, 0]
        assert np.all(gap <= math.exp(-ba.time) * (1 + 10 * dt) + 1e-12)


def test_determinism_across_worker_counts(fput1, bm1):
    kw = dict(output_times=[0.5, 1.0])
    one = integrate_sde(fput1, bm1, [1.0], 0.1, 1.0, 0.01, 3000, 9, workers=1, **kw)
    four = integrate_sde(fput1, bm1, [1.0], 0.1, 1.0, 0.01, 3000, 9, workers=4, **kw)
    for x, y in zip(one, four):
        assert np.array_equal(x.states, y.states)


def test_coupled_difference_zero_noise(fput1, bm1):
    cm = coupled_difference(fput1, bm1, [1.0], 0.0, 1.0, 0.01, 100, 10, p_list=(1.0, 2.0))
    assert cm.theta_p_moments == {1.0: 0.0, 2.0: 0.0}
    assert cm.delta_p_moments == {1.0: 0.0, 2.0: 0.0}


def test_first_order_error_shrinks_faster_than_eps(fput1, bm1):
    ratios = []
    for eps in (0.1, 0.025):
        cm = coupled_difference(fput1, bm1, [1.0], eps, 1.0, 0.01, 2000, 11, p_list=(2.0,))
        ratios.append(cm.delta_p_moments[2.0] / eps**2)
    assert ratios[1] < 0.5 * ratios[0]


def test_coupled_pair_shares_noise(fput1, bm1):
    pair = coupled_pair(fput1, bm1, [1.0], 0.01, 1.0, 0.01, 200, 12, output_times=[0.5, 1.0])
    assert len(pair.x_eps) == len(pair.y_eps) == 2
    for x, y in zip(pair.x_eps, pair.y_eps):
        assert np.max(np.abs(x.states - y.states)) < 1e-2


def test_gaussian_law_matches_simulation(bm2):
    A = np.array([[1.0, 0.5], [0.0, 2.0]])
    spec = linear_field(A)
    mean, cov = ou_gaussian_law(A, np.eye(2), [1.0, 1.0], 0.5, 1.0)
    batch = integrate_sde(spec, bm2, [1.0, 1.0], 0.5, 1.0, 0.001, 20_000, 13)[-1]
    assert batch.states.mean(axis=0) == pytest.approx(mean, abs=0.02)
    assert np.allclose(np.cov(batch.states.T), cov, atol=0.01)


def test_stationary_covariance_solves_lyapunov():
    A = np.array([[1.0, 0.3], [-0.2, 1.5]])
    S = stationary_covariance(A, np.array([[1.0, 0.0], [0.5, 1.0]]))
    Q = np.array([[1.0, 0.5], [0.5, 1.25]])
    assert np.allclose(A @ S + S @ A.T, Q)


def test_guards(fput1, bm2, bm1):
    with pytest.raises(StepSizeTooLarge):
        integrate_sde(fput1, bm1, [1.0], 0.1, 1.0, 0.5, 10, 0)
    with pytest.raises(DimensionMismatch):
        integrate_sde(fput1, bm2, [1.0], 0.1, 1.0, 0.01, 10, 0)
    with pytest.raises(NonFiniteState) as info:
        integrate_sde(fput1, bm1, [1e3], 0.0, 1.0, 0.01, 4, 0)
    assert info.value.trajectory_id == 0
    assert 1 <= info.value.step <= 100


def test_batch_rejects_non_finite_states():
    with pytest.raises(NonFiniteState) as info:
        TrajectoryBatch(
            states=np.array([[0.0], [np.nan]]), time=0.5, epsilon=0.1, process_tag=ProcessTag.Y_eps, step=50
        )
    assert (info.value.trajectory_id, info.value.step, info.value.process) == (1, 50, "Y_eps")


def test_batches_carry_their_grid_step(identity1, bm1):
    batches = integrate_sde(identity1, bm1, [1.0], 0.1, 1.0, 0.01, 8, 0, output_times=[0.0, 0.25, 1.0])
    assert [b.step for b in batches] == [0, 25, 100]
