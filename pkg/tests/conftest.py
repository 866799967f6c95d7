import numpy as np
import pytest

from mpmd.model import RequestSequence, validate_metric


def line_metric(positions, rates):
    pos = np.asarray(positions, dtype=float)
    return validate_metric(np.abs(pos[:, None] - pos[None, :]), rates)


def random_metric_completion(rng, n, rate_lo=0.01, rate_hi=100.0):
    """Shortest-path closure of random edge weights, with log-uniform rates."""
    W = rng.uniform(0.1, 10.0, (n, n))
    W = np.minimum(W, W.T)
    np.fill_diagonal(W, 0.0)
    for k in range(n):
        W = np.minimum(W, W[:, k][:, None] + W[k, :][None, :])
    rates = np.exp(rng.uniform(np.log(rate_lo), np.log(rate_hi), n))
    return validate_metric(W, rates)


@pytest.fixture
def two_points():
    """Two points 1.5 apart, requests at time 0 and 0.5."""
    metric = validate_metric([[0, 1.5], [1.5, 0]], [1, 1], ("x", "z"))
    return metric, RequestSequence.from_pairs(metric, [(0, 0.0), (1, 0.5)])


@pytest.fixture
def fig3_left():
    return line_metric([0, 1, 2, 4], [1 / 6, 1 / 12, 1 / 12, 1 / 3])


@pytest.fixture
def fig3_right():
    return line_metric([0, 1, 2, 4], [1 / 6, 1 / 5, 1 / 3, 1 / 2])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
