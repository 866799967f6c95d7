import math

import numpy as np
import pytest

from mpmd.arrivals import (
    GenConfig,
    Model,
    derive_seed,
    gen_centralized,
    gen_distributed,
    generate,
    random_metric,
    splitmix64,
)
from mpmd.errors import ValidationError
from mpmd.model import validate_metric

M = 10**5


@pytest.fixture(scope="module")
def three_points():
    return validate_metric([[0, 1, 2], [1, 0, 1], [2, 1, 0]], [0.2, 0.3, 0.5])


def test_splitmix_reference_value():
    # first output of the reference SplitMix64 stream seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_derive_seed_is_path_sensitive():
    assert derive_seed(1, 0) != derive_seed(1, 1)
    assert derive_seed(1, 0, 1) != derive_seed(1, 1, 0)
    assert derive_seed(7, 3) == derive_seed(7, 3)


def test_config_validation(three_points):
    with pytest.raises(ValidationError):
        GenConfig(three_points, 3)
    with pytest.raises(ValidationError):
        GenConfig(three_points, 0)
    assert GenConfig(three_points, 3, allow_odd=True).m == 3


@pytest.mark.parametrize("model", list(Model))
def test_same_seed_same_sequence(three_points, model):
    a = generate(GenConfig(three_points, 50, 9, model))
    b = generate(GenConfig(three_points, 50, 9, model))
    assert np.array_equal(a.arrivals, b.arrivals) and np.array_equal(a.locations, b.locations)
    c = generate(GenConfig(three_points, 50, 10, model))
    assert not np.array_equal(a.arrivals, c.arrivals)


def test_single_point_locations():
    metric = validate_metric([[0]], [2.0])
    seq = gen_centralized(GenConfig(metric, 100, 1))
    assert (seq.locations == 0).all()
    assert (np.diff(seq.arrivals) > 0).all()


def test_centralized_gap_mean():
    metric = validate_metric([[0, 1], [1, 0]], [0.25, 0.75])
    gaps = np.diff(gen_centralized(GenConfig(metric, M, 3)).arrivals, prepend=0.0)
    assert 0.99 <= gaps.mean() <= 1.01


def _freq_z(seq, metric):
    p = metric.location_probs
    counts = np.bincount(seq.locations, minlength=metric.n)
    return np.abs(counts - M * p) / np.sqrt(M * p * (1 - p))


@pytest.mark.parametrize("gen", [gen_centralized, gen_distributed])
def test_location_frequencies(three_points, gen):
    seq = gen(GenConfig(three_points, M, 5))
    assert (_freq_z(seq, three_points) <= 3).all()


def test_distributed_gaps_are_exponential(three_points):
    lam = three_points.total_rate
    gaps = np.diff(gen_distributed(GenConfig(three_points, M, 8)).arrivals)
    n = len(gaps)
    # mean and variance of Exp(lam), 99.9% two-sided (z = 3.29)
    assert abs(gaps.mean() - 1 / lam) <= 3.29 * (1 / lam) / math.sqrt(n)
    assert abs(gaps.var() - 1 / lam**2) <= 3.29 * math.sqrt(8 / lam**4 / n)


def test_single_point_models_agree():
    metric = validate_metric([[0]], [1.5])
    a = np.diff(gen_centralized(GenConfig(metric, M, 1)).arrivals)
    b = np.diff(gen_distributed(GenConfig(metric, M, 2)).arrivals)
    se = math.sqrt(2 / M) / 1.5
    assert abs(a.mean() - b.mean()) <= 4 * se


def test_models_equivalent(three_points):
    a = gen_centralized(GenConfig(three_points, M, 11))
    b = gen_distributed(GenConfig(three_points, M, 12))
    p = three_points.location_probs
    fa = np.bincount(a.locations, minlength=3) / M
    fb = np.bincount(b.locations, minlength=3) / M
    assert (np.abs(fa - fb) <= 4 * np.sqrt(2 * p * (1 - p) / M)).all()
    ga, gb = np.diff(a.arrivals), np.diff(b.arrivals)
    lam = three_points.total_rate
    assert abs(ga.mean() - gb.mean()) <= 4 * math.sqrt(2 / M) / lam
    assert abs((ga**2).mean() - (gb**2).mean()) <= 4 * math.sqrt(2 * 20 / M) / lam**2


@pytest.mark.parametrize("subset", [[0], [1, 2], [0, 2]])
def test_waiting_time_to_subset_is_exponential(three_points, subset):
    """Waits from an arrival to the next arrival inside S have mean 1/rate(S)."""
    seq = gen_centralized(GenConfig(three_points, 6 * 10**5, 21))
    t = seq.arrivals
    hits = np.flatnonzero(np.isin(seq.locations, subset))
    # start each sample at an arrival in S so that windows never overlap
    waits = np.diff(t[hits])[: M]
    assert len(waits) == M
    lam_s = three_points.rates[subset].sum()
    assert waits.mean() == pytest.approx(1 / lam_s, rel=0.01)


def test_random_metric_shape():
    m = random_metric(10, seed=3)
    assert m.n == 10 and (m.rates >= 0.1).all() and (m.rates <= 10).all()
    assert np.array_equal(m.dist, random_metric(10, seed=3).dist)
