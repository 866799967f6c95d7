"""Seeded Poisson request generators (centralized and distributed models).

Randomness comes from numpy's counter-based Philox generator.  Sub-streams
are keyed by hashing the master seed together with a path of integers
through SplitMix64, so a trial's stream depends only on (master seed, trial
index) and never on scheduling or worker count.

Exponential variates use the inverse CDF ``-log(U) / rate`` with
``U = 1 - random()`` in (0, 1]; locations are drawn by inverting the
cumulative rate distribution.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError
from .model import MetricSpace, RequestSequence, validate_metric

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Mix a 64-bit master seed with an integer path into a sub-seed."""
    h = splitmix64(int(master) & MASK64)
    for p in path:
        h = splitmix64(h ^ (int(p) & MASK64))
    return h


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


def exp_variates(rng: np.random.Generator, rate: float, size: int) -> np.ndarray:
    u = 1.0 - rng.random(size)
    return -np.log(u) / rate


class Model(str, Enum):
    CENTRALIZED = "centralized"
    DISTRIBUTED = "distributed"


@dataclass(frozen=True)
class GenConfig:
    metric: MetricSpace
    m: int
    seed: int = 0
    model: Model = Model.CENTRALIZED
    allow_odd: bool = False

    def __post_init__(self):
        if self.m < 1 or (self.m < 2 and not self.allow_odd):
            raise ValidationError(f"need m >= 2 requests, got {self.m}")
        if self.m % 2 and not self.allow_odd:
            raise ValidationError(f"m must be even, got {self.m}")
        object.__setattr__(self, "model", Model(self.model))


def _make_strict(t: np.ndarray) -> np.ndarray:
    """Nudge float collisions apart by one ulp so arrivals strictly increase."""
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        t = t.copy()
        for i in range(int(bad[0]) + 1, len(t)):
            if t[i] <= t[i - 1]:
                log.info("arrival collision at index %d; perturbing by one ulp", i)
                t[i] = np.nextafter(t[i - 1], np.inf)
    return t


def centralized_arrays(metric: MetricSpace, m: int, seed: int):
    """Raw ``(times, locations)`` arrays of the centralized model."""
    rng = make_rng(derive_seed(seed, 0))
    gaps = exp_variates(rng, metric.total_rate, m)
    cdf = np.cumsum(metric.rates) / metric.total_rate
    locs = np.searchsorted(cdf, rng.random(m), side="right")
    locs = np.minimum(locs, metric.n - 1)
    return _make_strict(np.cumsum(gaps)), locs


def gen_centralized(cfg: GenConfig) -> RequestSequence:
    t, loc = centralized_arrays(cfg.metric, cfg.m, cfg.seed)
    return RequestSequence(cfg.metric, t, loc)


def _point_stream(x: int, rate: float, seed: int, chunk: int = 1024):
    """Endless ``(time, x)`` events of one point's renewal process."""
    rng = make_rng(seed)
    now = 0.0
    while True:
        times = now + np.cumsum(exp_variates(rng, rate, chunk))
        now = float(times[-1])
        for t in times.tolist():
            yield t, x


def gen_distributed(cfg: GenConfig) -> RequestSequence:
    """Merge independent per-point renewal streams and keep the first m events."""
    metric = cfg.metric
    streams = [_point_stream(x, float(metric.rates[x]), derive_seed(cfg.seed, 1, x))
               for x in range(metric.n)]
    merged = heapq.merge(*streams)
    events = [next(merged) for _ in range(cfg.m)]
    t = _make_strict(np.array([e[0] for e in events]))
    loc = np.array([e[1] for e in events], dtype=np.int64)
    return RequestSequence(metric, t, loc)


def generate(cfg: GenConfig) -> RequestSequence:
    if cfg.model is Model.DISTRIBUTED:
        return gen_distributed(cfg)
    return gen_centralized(cfg)


def random_metric(n: int, seed: int = 0, rate_range=(0.1, 10.0), dim: int = 2) -> MetricSpace:
    """Euclidean points in the unit cube with log-uniform rates."""
    rng = make_rng(derive_seed(seed, 2))
    pts = rng.random((n, dim))
    D = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    lo, hi = np.log(rate_range[0]), np.log(rate_range[1])
    rates = np.exp(lo + (hi - lo) * rng.random(n))
    return validate_metric(D, rates)
