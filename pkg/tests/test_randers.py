import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flbo.exceptions import ConfigurationError, InvalidMetricError, MalformedInputError
from flbo.randers import (
    RandersMetric,
    dual_randers,
    dual_via_block_inverse,
    eval_dual_definition,
    eval_primal,
    finsler_diffusivity,
    random_metric,
    validate_randers,
)


@st.composite
def metrics(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    drift = draw(st.floats(0.0, 0.95))
    return random_metric(np.random.default_rng(seed), max_drift=max(drift, 1e-6))


def test_worked_example():
    d = dual_randers(RandersMetric(np.eye(3), [0.5, 0.0, 0.0]))
    np.testing.assert_allclose(d.m_star, np.diag([16 / 9, 4 / 3, 4 / 3]), atol=1e-14)
    np.testing.assert_allclose(d.omega_star, [-2 / 3, 0, 0], atol=1e-14)
    assert d.randers_alpha == pytest.approx(0.75)


def test_zero_drift_is_riemannian():
    m = np.diag([2.0, 3.0, 5.0])
    d = dual_randers(RandersMetric(m, np.zeros(3)))
    np.testing.assert_allclose(d.m_star, np.linalg.inv(m), atol=1e-15)
    assert not np.any(d.omega_star)


def test_primal_is_asymmetric():
    metric = RandersMetric(np.eye(3), [0.3, 0.0, 0.0])
    v = np.array([1.0, 0.0, 0.0])
    assert eval_primal(metric, v) == pytest.approx(1.3)
    assert eval_primal(metric, -v) == pytest.approx(0.7)


@settings(max_examples=60, deadline=None)
@given(metrics())
def test_closed_form_matches_block_inverse(metric):
    a, b = dual_randers(metric), dual_via_block_inverse(metric)
    np.testing.assert_allclose(a.m_star, b.m_star, rtol=1e-9, atol=1e-12 * np.abs(b.m_star).max())
    np.testing.assert_allclose(a.omega_star, b.omega_star, atol=1e-10 * np.abs(b.m_star).max())


@settings(max_examples=60, deadline=None)
@given(metrics())
def test_dual_of_dual_is_primal(metric):
    back = dual_randers(dual_randers(metric).as_metric())
    np.testing.assert_allclose(back.m_star, metric.m, rtol=1e-9)
    np.testing.assert_allclose(back.omega_star, metric.omega, atol=1e-9 * np.abs(metric.m).max())


@settings(max_examples=60, deadline=None)
@given(metrics())
def test_dual_drift_bound(metric):
    d = dual_randers(metric)
    q = metric.drift_norm_sq / d.randers_alpha
    assert d.drift_norm_sq == pytest.approx(q / (1 + q), abs=1e-10)
    assert d.drift_norm_sq < 1


@settings(max_examples=40, deadline=None)
@given(metrics())
def test_diffusivity_is_scaled_inverse(metric):
    d = dual_randers(metric)
    expected = np.linalg.inv(metric.m) / d.randers_alpha
    np.testing.assert_allclose(finsler_diffusivity(d), expected, rtol=1e-9, atol=1e-12 * np.abs(expected).max())
    assert np.linalg.eigvalsh(finsler_diffusivity(d)).min() > 0


@settings(max_examples=15, deadline=None)
@given(metrics(), st.integers(0, 1000))
def test_brute_force_dual(metric, seed):
    v = np.random.default_rng(seed).standard_normal(3)
    exact = dual_randers(metric)(v)
    assert eval_dual_definition(metric, v, n_samples=4000) == pytest.approx(exact, rel=2e-3)


@settings(max_examples=30, deadline=None)
@given(metrics(), st.integers(0, 1000))
def test_fenchel_young(metric, seed):
    # <v, b> <= F*(v) F(b) for every pair
    rng = np.random.default_rng(seed)
    v, b = rng.standard_normal(3), rng.standard_normal(3)
    assert v @ b <= dual_randers(metric)(v) * metric(b) + 1e-12


def test_dual_of_zero_vector():
    metric = RandersMetric(np.eye(3), [0.2, 0.1, 0.0])
    assert eval_dual_definition(metric, np.zeros(3)) == 0.0
    assert dual_randers(metric)(np.zeros(3)) == 0.0


def test_too_few_samples():
    with pytest.raises(ConfigurationError):
        eval_dual_definition(RandersMetric(np.eye(3), np.zeros(3)), np.ones(3), n_samples=4)


@pytest.mark.parametrize(
    "m, omega",
    [
        (np.eye(3), [1.0, 0.0, 0.0]),
        (np.eye(3), [0.0, 2.0, 0.0]),
        (np.diag([1.0, 1.0, -1.0]), [0.0, 0.0, 0.0]),
        (np.diag([1.0, 1.0, 0.0]), [0.0, 0.0, 0.0]),
    ],
)
def test_invalid_metrics_rejected(m, omega):
    report = validate_randers(m, omega)
    assert not report.valid
    with pytest.raises(InvalidMetricError):
        dual_randers(RandersMetric(m, omega))


def test_validity_report_fields():
    report = validate_randers(np.diag([4.0, 1.0, 1.0]), [1.0, 0.0, 0.0])
    assert report.is_spd and report.valid
    assert report.drift_norm_sq == pytest.approx(0.25)
    assert report.min_eigenvalue == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [np.ones((2, 2)), np.full((3, 3), np.nan)])
def test_malformed_matrix(bad):
    with pytest.raises(MalformedInputError):
        RandersMetric(bad, np.zeros(3))


def test_json_round_trip():
    metric = random_metric(np.random.default_rng(3))
    text = metric.to_json()
    assert set(json.loads(text)) == {"M", "omega"}
    back = RandersMetric.from_json(text)
    np.testing.assert_array_equal(back.m, metric.m)
    np.testing.assert_array_equal(back.omega, metric.omega)
