"""Per-point radii, exponential-delay expectations and the K_f constant."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DivergentIntegral, ValidationError
from .model import LINEAR, DelaySpec, MetricSpace, eval_delay

log = logging.getLogger(__name__)

QUAD_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class RadiusTable:
    rho: np.ndarray
    spec: DelaySpec = LINEAR

    def __getitem__(self, x: int) -> float:
        return float(self.rho[x])

    def __len__(self) -> int:
        return len(self.rho)

    def to_json(self) -> dict:
        return {"rho": [float(r) for r in self.rho], "spec": self.spec.to_json()}


def ball_rate(metric: MetricSpace, x: int, u: float, closed: bool = True) -> float:
    """Total rate of the closed (``d <= u``) or open (``d < u``) ball around x."""
    if u < 0:
        raise ValidationError("ball radius must be non-negative")
    d = metric.dist[x]
    inside = d <= u if closed else d < u
    return math.fsum(metric.rates[inside])


def _segments(metric: MetricSpace, x: int):
    """Yield ``(start, end, rate)`` for each constant piece of u -> rate(B(x,u))."""
    d = metric.dist[x]
    order = np.argsort(d, kind="stable")
    ds, lam = d[order], metric.rates[order]
    breaks = np.unique(ds)
    acc = 0.0
    k = 0
    for idx, start in enumerate(breaks):
        while k < len(ds) and ds[k] <= start:
            acc += lam[k]
            k += 1
        end = breaks[idx + 1] if idx + 1 < len(breaks) else math.inf
        yield float(start), float(end), acc


def compute_radius_linear(metric: MetricSpace, x: int) -> float:
    """Smallest u >= 0 with 1 / rate(closed ball of radius u) <= u."""
    for start, end, rate in _segments(metric, x):
        u = max(start, 1.0 / rate)
        if u < end:
            return u
    raise AssertionError("unreachable: the last segment is unbounded")


def expected_delay_exponential(spec: DelaySpec, mu: float) -> float:
    """E[f(W)] for W ~ Exp(mu)."""
    if not mu > 0:
        raise ValidationError("exponential rate must be positive")
    if spec.kind == "linear":
        return 1.0 / mu
    if spec.kind == "power":
        return math.gamma(spec.alpha + 1.0) / mu ** spec.alpha
    return _quad_tail(lambda t: eval_delay(spec, t) * mu * math.exp(-mu * t),
                      [p[0] for p in spec.breakpoints])


def _quad_tail(fn, points) -> float:
    """Integrate ``fn`` on [0, inf) splitting at the given breakpoints."""
    edges = sorted({0.0, *(float(p) for p in points)})
    total = []
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for a, b in zip(edges, edges[1:]):
                total.append(integrate.quad(fn, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)[0])
            total.append(integrate.quad(fn, edges[-1], math.inf, epsabs=0.0,
                                        epsrel=QUAD_RTOL, limit=200)[0])
        except integrate.IntegrationWarning as exc:
            raise DivergentIntegral(str(exc)) from exc
    val = math.fsum(total)
    if not math.isfinite(val):
        raise DivergentIntegral("expected delay is infinite")
    return val


def compute_radius_general(metric: MetricSpace, x: int, spec: DelaySpec) -> float:
    """Smallest u with u >= E[f(W)], W ~ Exp(rate of the closed ball B(x, u))."""
    for start, end, rate in _segments(metric, x):
        u = max(start, expected_delay_exponential(spec, rate))
        if u < end:
            return u
    return math.inf


def radius_table(metric: MetricSpace, spec: DelaySpec = LINEAR) -> RadiusTable:
    if spec.kind == "linear":
        rho = [compute_radius_linear(metric, x) for x in range(metric.n)]
    else:
        rho = [compute_radius_general(metric, x, spec) for x in range(metric.n)]
    arr = np.array(rho, dtype=float)
    if not np.isfinite(arr).all():
        raise DivergentIntegral("radius is infinite: the delay function has no finite expectation")
    arr.setflags(write=False)
    return RadiusTable(arr, spec)


def expected_min_exponential(mu: float, a: float) -> float:
    """E[min(Y, a)] for Y ~ Exp(mu), i.e. (1 - exp(-mu a)) / mu."""
    if not (mu > 0 and a > 0):
        raise ValidationError("need mu > 0 and a > 0")
    return -math.expm1(-mu * a) / mu


def _first_reach(spec: DelaySpec, level: float) -> float:
    """inf{t : f(t) >= level} for the non-decreasing delay ``f``."""
    if level <= 0:
        return 0.0
    if spec.kind == "linear":
        return level
    if spec.kind == "power":
        return level ** (1.0 / spec.alpha)
    ts = [p[0] for p in spec.breakpoints]
    vs = [p[1] for p in spec.breakpoints]
    for (t0, v0), (t1, v1) in zip(zip(ts, vs), zip(ts[1:], vs[1:])):
        if v1 >= level:
            return t0 + (level - v0) / (v1 - v0) * (t1 - t0)
    slope = spec._final_slope
    if slope == 0:
        return math.inf
    return ts[-1] + (level - vs[-1]) / slope


def kf_objective(spec: DelaySpec, mu: float) -> float:
    """E[f(X)] / E[min(f(X'), E[f(X)])] with X ~ Exp(mu), X' ~ Exp(2 mu)."""
    c = expected_delay_exponential(spec, mu)
    tau = _first_reach(spec, c)
    rate = 2.0 * mu
    body = 0.0
    if tau > 0:
        fn = lambda t: eval_delay(spec, t) * rate * math.exp(-rate * t)
        pts = [p[0] for p in spec.breakpoints if 0 < p[0] < tau] if spec.kind == "table" else []
        edges = [0.0, *pts, tau] if math.isfinite(tau) else None
        if edges is None:
            body = _quad_tail(fn, pts)
        else:
            body = math.fsum(integrate.quad(fn, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)[0]
                             for a, b in zip(edges, edges[1:]))
    tail = c * math.exp(-rate * tau) if math.isfinite(tau) else 0.0
    return c / (body + tail)


def compute_Kf(spec: DelaySpec, lo: float = 1e-6, hi: float = 1e6, grid: int = 1000) -> float:
    """Maximum of :func:`kf_objective` over mu in [lo, hi].

    Log-spaced grid followed by golden-section refinement around the best
    grid point.  Logs a warning when the grid profile has several local
    maxima, since then the refined value is only a local optimum.
    """
    return kf_search(spec, lo, hi, grid)[0]


def kf_search(spec: DelaySpec, lo: float = 1e-6, hi: float = 1e6, grid: int = 1000):
    """Return ``(K_f, argmax mu, grid values)``."""
    log_mu = np.linspace(math.log(lo), math.log(hi), grid)
    vals = np.array([kf_objective(spec, math.exp(v)) for v in log_mu])
    best = int(np.argmax(vals))
    inner = vals[1:-1]
    peaks = np.sum((inner > vals[:-2] * (1 + 1e-9)) & (inner > vals[2:] * (1 + 1e-9)))
    if peaks > 1:
        log.warning("K_f objective for %s has %d local maxima on the grid", spec, peaks)
    a = log_mu[max(best - 1, 0)]
    b = log_mu[min(best + 1, grid - 1)]
    g = (math.sqrt(5) - 1) / 2
    obj = lambda v: kf_objective(spec, math.exp(v))
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(60):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = obj(d)
    refined_x = (a + b) / 2
    refined = obj(refined_x)
    if refined >= vals[best]:
        return refined, math.exp(refined_x), vals
    return float(vals[best]), math.exp(log_mu[best]), vals
