import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mpmd.errors import DivergentIntegral
from mpmd.model import LINEAR, DelaySpec, validate_metric
from mpmd.radius import (
    ball_rate,
    compute_Kf,
    compute_radius_general,
    compute_radius_linear,
    expected_delay_exponential,
    expected_min_exponential,
    kf_search,
    radius_table,
)

from conftest import random_metric_completion

# K_f for t**alpha from the closed form 1 / (2**-a * P(a+1, 2G) + exp(-2G)),
# G = Gamma(a+1)**(1/a), evaluated with mpmath at 30 digits
KF_POWER = {0.5: 1.53106315308813, 1: 2.31303528549933, 2: 5.16984253202880,
            3: 11.3754360665903, 4: 24.7988515004425}


def brute_radius(metric, x):
    """Smallest candidate u (breakpoint or 1/rate) satisfying the definition."""
    cands = set(metric.dist[x].tolist())
    for u in metric.dist[x]:
        cands.add(1.0 / ball_rate(metric, x, float(u)))
    return min(u for u in cands if u > 0 and 1.0 / ball_rate(metric, x, u) <= u * (1 + 1e-12))


def test_ball_rate_examples(fig3_left):
    assert ball_rate(fig3_left, 0, 2.0) == pytest.approx(1 / 3)
    assert ball_rate(fig3_left, 0, 0.0) == pytest.approx(1 / 6)
    assert ball_rate(fig3_left, 0, 0.0, closed=False) == 0.0
    assert ball_rate(fig3_left, 0, 2.0, closed=False) == pytest.approx(1 / 4)


def test_worked_radii(fig3_left, fig3_right):
    assert compute_radius_linear(fig3_left, 0) == 3.0
    assert compute_radius_linear(fig3_right, 0) == 2.0


def test_single_point_radius():
    assert compute_radius_linear(validate_metric([[0]], [4]), 0) == 0.25


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 20))
def test_radius_sandwich_and_range(seed, n):
    metric = random_metric_completion(np.random.default_rng(seed), n)
    for x in range(n):
        rho = compute_radius_linear(metric, x)
        assert ball_rate(metric, x, rho, closed=False) * rho <= 1 + 1e-9
        assert ball_rate(metric, x, rho) * rho >= 1 - 1e-9
        assert 0 < rho <= 1 / metric.rates[x] * (1 + 1e-12)
        assert rho == pytest.approx(brute_radius(metric, x), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.01, 50))
def test_scaling_rates_up_never_grows_radius(seed, c):
    metric = random_metric_completion(np.random.default_rng(seed), 8)
    faster = validate_metric(metric.dist, metric.rates * c)
    for x in range(metric.n):
        assert compute_radius_linear(faster, x) <= compute_radius_linear(metric, x)


def test_general_radius_with_linear_spec_matches():
    rng = np.random.default_rng(5)
    for _ in range(100):
        metric = random_metric_completion(rng, int(rng.integers(1, 12)))
        for x in range(metric.n):
            assert compute_radius_general(metric, x, LINEAR) == pytest.approx(
                compute_radius_linear(metric, x), rel=1e-12)


@pytest.mark.parametrize("rate,expected", [(1.0, 2.0), (2.0, 0.5)])
def test_power_radius_single_point(rate, expected):
    metric = validate_metric([[0]], [rate])
    assert compute_radius_general(metric, 0, DelaySpec.power(2)) == pytest.approx(expected, rel=1e-12)


def test_expected_delay_examples():
    assert expected_delay_exponential(LINEAR, 2.0) == 0.5
    assert expected_delay_exponential(DelaySpec.power(2), 1.0) == pytest.approx(2.0)
    assert expected_delay_exponential(DelaySpec.power(1), 3.0) == pytest.approx(1 / 3)
    sample = np.random.default_rng(1).exponential(1.0, 10**7)
    assert np.mean(sample**2) == pytest.approx(2.0, rel=0.01)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0])
@pytest.mark.parametrize("mu", [0.3, 1.0, 4.0])
def test_power_expectation_against_quadrature(alpha, mu):
    val = integrate.quad(lambda t: t**alpha * mu * math.exp(-mu * t), 0, math.inf,
                         epsabs=0, epsrel=1e-12, limit=200)[0]
    assert expected_delay_exponential(DelaySpec.power(alpha), mu) == pytest.approx(val, abs=1e-6)


def test_table_expectation_matches_piecewise_closed_form():
    # f(t) = min(t, 1): E = (1 - exp(-mu)) / mu
    spec = DelaySpec.table([(0, 0), (1, 1), (2, 1)])
    for mu in (0.5, 1.0, 3.0):
        assert expected_delay_exponential(spec, mu) == pytest.approx(-math.expm1(-mu) / mu, rel=1e-8)


def test_divergent_table_radius_raises():
    spec = DelaySpec.table([(0, 0), (1, 1e308)])
    metric = validate_metric([[0]], [1e-3])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(DivergentIntegral):
            radius_table(metric, spec)


def test_expected_min_examples():
    assert expected_min_exponential(2.0, 1.0) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-15)
    assert expected_min_exponential(2.0, 1.0) == pytest.approx(0.432332, abs=1e-6)
    assert expected_min_exponential(1.0, 50.0) == pytest.approx(1.0, abs=1e-9)
    assert expected_min_exponential(1.0, 1e-12) == pytest.approx(1e-12, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-6, 1e3))
def test_expected_min_below_both(mu, a):
    assert expected_min_exponential(mu, a) <= min(1 / mu, a) * (1 + 1e-12)


def test_kf_linear_value_and_flatness():
    k, _, vals = kf_search(LINEAR)
    assert k == pytest.approx(2 / (1 - math.exp(-2)), abs=1e-9)
    assert vals.max() / vals.min() <= 1 + 1e-6
    assert compute_Kf(DelaySpec.power(1)) == pytest.approx(k, abs=1e-4)


@pytest.mark.parametrize("alpha", sorted(KF_POWER))
def test_kf_power_matches_closed_form(alpha):
    assert compute_Kf(DelaySpec.power(alpha)) == pytest.approx(KF_POWER[alpha], rel=1e-9)


def test_kf_grows_at_most_linearly_in_alpha():
    alphas = np.array([2.0, 3.0, 4.0])
    logs = np.log([compute_Kf(DelaySpec.power(a)) for a in alphas])
    slope = np.polyfit(alphas, logs, 1)[0]
    assert 0 < slope <= 2 / math.e * 1.2


def test_radius_table_json(fig3_left):
    t = radius_table(fig3_left)
    assert t.to_json()["rho"][0] == 3.0 and t.to_json()["spec"] == "linear"
    assert len(t) == 4
