import numpy as np
import pytest

from modules.wasserstein import EmpiricalMeasure, wp_assignment
from modules.wp_properties import (
    SAMPLE_LAWS,
    brute_force_wp,
    cloud_scale,
    exactness_check,
    metric_checks,
    moment_convergence,
    property_suite,
    verify_shift_linearity,
    verify_translation_homogeneity,
)


@pytest.fixture
def cloud(rng):
    return EmpiricalMeasure(rng.standard_normal((200, 2)))


def test_cloud_scale():
    mu = EmpiricalMeasure([[-1.0, 0.0], [1.0, 0.0]])
    assert cloud_scale(mu) == pytest.approx(1.0)


@pytest.mark.parametrize("u", [[0.0, 0.0], [3.0, 4.0], [0.1, -0.2]])
@pytest.mark.parametrize("p", [1.0, 2.0])
def test_shift_linearity_at_least_one(cloud, u, p):
    check = verify_shift_linearity(cloud, u, p)
    assert check.passed
    assert check.lhs == pytest.approx(np.linalg.norm(u), abs=1e-9)


def test_shift_band_below_one(cloud):
    check = verify_shift_linearity(cloud, [3.0, 4.0], 0.5)
    assert check.name == "shift_linearity_band"
    assert check.passed
    assert check.detail["lower"] <= check.lhs <= check.detail["upper"] + check.tol


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_translation_and_homogeneity(rng, p):
    mu = EmpiricalMeasure(rng.standard_normal((60, 2)))
    nu = EmpiricalMeasure(rng.exponential(1.0, (60, 2)))
    checks = verify_translation_homogeneity(mu, nu, [1.0, 2.0], [-0.5, 0.0], -2.0, p)
    assert checks["translation"].passed
    assert checks["homogeneity"].passed
    factor = 2.0 if p >= 1 else 2.0**p
    assert checks["homogeneity"].detail["factor"] == pytest.approx(factor)


def test_brute_force_matches_assignment(rng):
    a = EmpiricalMeasure(rng.standard_normal((6, 2)))
    b = EmpiricalMeasure(rng.standard_normal((6, 2)))
    for p in (0.5, 1.0, 2.0):
        assert brute_force_wp(a, b, p) == pytest.approx(wp_assignment(a, b, p).value, abs=1e-12)
    with pytest.raises(ValueError):
        big = EmpiricalMeasure(np.zeros((8, 1)))
        brute_force_wp(big, big, 1.0)


def test_exactness_and_metric_checks():
    checks = exactness_check(n_instances=5, p_list=(0.5, 2.0), seed=1)
    assert len(checks) == 10
    assert all(c.passed for c in checks)
    metric = metric_checks(n=16, n_triples=3, p_list=(0.5, 1.0, 2.0), seed=1)
    assert {c.name for c in metric} == {"symmetry", "triangle"}
    assert all(c.passed for c in metric)


def test_moment_convergence_trends_down():
    rows = moment_convergence("gaussian", 2.0, sizes=(100, 10_000), seed=2)
    assert [r["n"] for r in rows] == [100, 10_000]
    assert rows[1]["wp"] < rows[0]["wp"]


def test_sample_laws_shapes(rng):
    for sampler in SAMPLE_LAWS.values():
        assert sampler(rng, 10, 2).shape == (10, 2)


def test_property_suite_small():
    report = property_suite(n=64, seed=0, n_exactness=3)
    assert report.all_passed, [c.to_dict() for c in report.failures()]
    payload = report.to_dict()
    assert payload["all_pass"] is True
    assert payload["n_checks"] == len(report.checks)
    assert "pass" in payload["checks"][0]
