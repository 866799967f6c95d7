"""Domain types: metric spaces, request sequences, delay functions, solutions.

Everything here is immutable after construction; arrays are stored
read-only so instances can be shared freely between workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    AsymmetricDistance,
    DoubleCoveredRequest,
    NegativeDuration,
    NonPositiveRate,
    TriangleViolation,
    UncoveredRequest,
    ValidationError,
)

TOL = 1e-9
MAX_ALPHA = 50.0


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """Finite metric with a Poisson arrival rate attached to every point.

    Build through :func:`validate_metric`; the constructor itself does not
    check the metric axioms.
    """

    labels: tuple
    dist: np.ndarray
    rates: np.ndarray
    non_metric: bool = False

    @property
    def n(self) -> int:
        return len(self.labels)

    @cached_property
    def total_rate(self) -> float:
        return math.fsum(self.rates)

    @cached_property
    def d_max(self) -> float:
        finite = self.dist[np.isfinite(self.dist)]
        return float(finite.max()) if finite.size else 0.0

    @property
    def location_probs(self) -> np.ndarray:
        return self.rates / self.total_rate

    def scaled(self, c: float) -> "MetricSpace":
        """Distances times ``c`` and rates divided by ``c`` (time rescaled too)."""
        return MetricSpace(self.labels, _frozen(self.dist * c),
                           _frozen(self.rates / c), self.non_metric)

    def to_json(self) -> dict:
        return {"labels": list(self.labels),
                "dist": self.dist.tolist(),
                "rates": self.rates.tolist()}


def validate_metric(dist, rates, labels: Sequence | None = None, *,
                    allow_non_metric: bool = False, tol: float = TOL) -> MetricSpace:
    """Check the metric axioms and return a :class:`MetricSpace`.

    ``allow_non_metric`` admits infinite entries and skips the diagonal and
    triangle checks; it exists only for the bipartite demo instance.
    """
    D = np.array(dist, dtype=float)
    lam = np.array(rates, dtype=float).reshape(-1)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] < 1:
        raise ValidationError(f"distance table must be square and non-empty, got shape {D.shape}")
    n = D.shape[0]
    if lam.shape[0] != n:
        raise ValidationError(f"expected {n} rates, got {lam.shape[0]}")
    if labels is None:
        labels = tuple(range(n))
    labels = tuple(labels)
    if len(labels) != n:
        raise ValidationError(f"expected {n} labels, got {len(labels)}")
    for x in range(n):
        if not (lam[x] > 0) or not math.isfinite(lam[x]):
            raise NonPositiveRate(x, float(lam[x]))
    if np.isnan(D).any():
        raise ValidationError("distance table contains NaN")
    if (D < 0).any():
        i, j = np.argwhere(D < 0)[0]
        raise ValidationError(f"negative distance d[{i}][{j}]={D[i, j]!r}")
    with np.errstate(invalid="ignore"):
        asym = np.argwhere(~((D == D.T) | (np.abs(D - D.T) <= tol)))
    if asym.size:
        i, j = asym[0]
        raise AsymmetricDistance(int(i), int(j), float(D[i, j]), float(D[j, i]))
    if not allow_non_metric:
        if not np.isfinite(D).all():
            raise ValidationError("infinite distances are only allowed for non-metric instances")
        diag = np.abs(np.diag(D))
        if (diag > tol).any():
            x = int(np.argmax(diag))
            raise ValidationError(f"d[{x}][{x}] must be 0, got {D[x, x]!r}")
        for j in range(n):
            # excess[i, k] = d(i,k) - d(i,j) - d(j,k)
            excess = D - (D[:, j][:, None] + D[j, :][None, :])
            if (excess > tol).any():
                i, k = np.unravel_index(int(np.argmax(excess)), excess.shape)
                raise TriangleViolation(int(i), j, int(k), float(excess[i, k]))
        D = np.minimum(D, D.T)
        np.fill_diagonal(D, 0.0)
    return MetricSpace(labels, _frozen(D), _frozen(lam), allow_non_metric)


@dataclass(frozen=True)
class Request:
    id: int
    location: int
    arrival: float


@dataclass(frozen=True, eq=False)
class RequestSequence:
    """Requests sorted strictly by arrival time; ids are sequence indices."""

    metric: MetricSpace
    arrivals: np.ndarray
    locations: np.ndarray

    def __post_init__(self):
        t = np.array(self.arrivals, dtype=float).reshape(-1)
        loc = np.array(self.locations, dtype=np.int64).reshape(-1)
        if t.shape != loc.shape:
            raise ValidationError("arrivals and locations differ in length")
        if t.size:
            if not np.isfinite(t).all() or t[0] < 0:
                raise ValidationError("arrival times must be finite and non-negative")
            if (np.diff(t) <= 0).any():
                raise ValidationError("arrival times must be strictly increasing")
            if loc.min() < 0 or loc.max() >= self.metric.n:
                raise ValidationError("request location outside the metric space")
        t.setflags(write=False)
        loc.setflags(write=False)
        object.__setattr__(self, "arrivals", t)
        object.__setattr__(self, "locations", loc)

    @classmethod
    def from_pairs(cls, metric: MetricSpace, pairs: Iterable[tuple[int, float]]) -> "RequestSequence":
        """Build from ``(location, time)`` pairs in any order."""
        items = sorted(((float(t), int(x)) for x, t in pairs), key=lambda p: p[0])
        return cls(metric, [t for t, _ in items], [x for _, x in items])

    def __len__(self) -> int:
        return int(self.arrivals.shape[0])

    def __getitem__(self, i: int) -> Request:
        return Request(int(i), int(self.locations[i]), float(self.arrivals[i]))

    def __iter__(self) -> Iterator[Request]:
        for i in range(len(self)):
            yield self[i]

    @property
    def requests(self) -> list[Request]:
        return list(self)

    @property
    def last_arrival(self) -> float:
        return float(self.arrivals[-1]) if len(self) else 0.0

    def scaled(self, c: float) -> "RequestSequence":
        return RequestSequence(self.metric.scaled(c), self.arrivals * c, self.locations)

    def to_json(self, metric_ref=None) -> dict:
        return {"metric": metric_ref if metric_ref is not None else self.metric.to_json(),
                "requests": [{"loc": int(x), "t": float(t)}
                             for x, t in zip(self.locations, self.arrivals)]}


@dataclass(frozen=True)
class DelaySpec:
    """Delay cost function ``f``: linear, power ``t**alpha``, or a
    piecewise-linear table extrapolated with its final slope."""

    kind: str = "linear"
    alpha: float = 1.0
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind == "linear":
            return
        if self.kind == "power":
            a = float(self.alpha)
            if not (0 < a <= MAX_ALPHA):
                raise ValidationError(f"power exponent must lie in (0, {MAX_ALPHA}], got {a!r}")
            object.__setattr__(self, "alpha", a)
            return
        if self.kind != "table":
            raise ValidationError(f"unknown delay kind {self.kind!r}")
        pts = [(float(t), float(v)) for t, v in self.breakpoints]
        if not pts:
            raise ValidationError("table delay needs at least one breakpoint")
        if pts[0][0] < 0:
            raise ValidationError("table breakpoints must be at non-negative times")
        if pts[0][0] > 0:
            pts.insert(0, (0.0, 0.0))
        if pts[0][1] != 0:
            raise ValidationError("table delay must satisfy f(0) = 0")
        if len(pts) < 2:
            raise ValidationError("table delay needs a breakpoint after t = 0")
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if not t1 > t0:
                raise ValidationError("table breakpoint times must be strictly increasing")
            if v1 < v0:
                raise ValidationError("table values must be non-decreasing")
        object.__setattr__(self, "breakpoints", tuple(pts))

    @classmethod
    def linear(cls) -> "DelaySpec":
        return cls("linear")

    @classmethod
    def power(cls, alpha: float) -> "DelaySpec":
        return cls("power", alpha=alpha)

    @classmethod
    def table(cls, points) -> "DelaySpec":
        return cls("table", breakpoints=tuple(tuple(p) for p in points))

    @classmethod
    def parse(cls, text: str) -> "DelaySpec":
        """Parse ``linear``, ``power:<alpha>`` or ``table:<json path>``."""
        head, _, arg = text.partition(":")
        head = head.strip().lower()
        if head == "linear" and not arg:
            return cls.linear()
        if head == "power" and arg:
            try:
                return cls.power(float(arg))
            except ValueError as exc:
                raise ValidationError(f"bad power exponent in {text!r}") from exc
        if head == "table" and arg:
            import json
            with open(arg) as fh:
                data = json.load(fh)
            pts = data["breakpoints"] if isinstance(data, dict) else data
            return cls.table(pts)
        raise ValidationError(f"cannot parse delay spec {text!r}")

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear" or (self.kind == "power" and self.alpha == 1.0)

    @property
    def bounded(self) -> bool:
        return self.kind == "table" and self._final_slope == 0.0

    @property
    def sup(self) -> float:
        return self.breakpoints[-1][1] if self.bounded else math.inf

    @cached_property
    def _final_slope(self) -> float:
        (t0, v0), (t1, v1) = self.breakpoints[-2:]
        return (v1 - v0) / (t1 - t0)

    def __call__(self, t):
        return eval_delay(self, t)

    def to_json(self):
        if self.kind == "linear":
            return "linear"
        if self.kind == "power":
            return f"power:{self.alpha!r}"
        return {"kind": "table", "breakpoints": [list(p) for p in self.breakpoints]}

    def __str__(self) -> str:
        if self.kind == "table":
            return f"table({len(self.breakpoints)} pts)"
        return str(self.to_json())


LINEAR = DelaySpec.linear()


def eval_delay(spec: DelaySpec, t):
    """Delay cost ``f(t)``; accepts a scalar or an array of durations."""
    arr = np.asarray(t, dtype=float)
    if (arr < 0).any():
        raise NegativeDuration(f"delay evaluated at negative duration {t!r}")
    if spec.kind == "linear":
        out = arr
    elif spec.kind == "power":
        out = arr if spec.alpha == 1.0 else np.power(arr, spec.alpha)
    else:
        ts = np.array([p[0] for p in spec.breakpoints])
        vs = np.array([p[1] for p in spec.breakpoints])
        out = np.interp(arr, ts, vs)
        beyond = arr > ts[-1]
        if np.any(beyond):
            out = np.where(beyond, vs[-1] + spec._final_slope * (arr - ts[-1]), out)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CostBreakdown:
    connection: float = 0.0
    delay: float = 0.0
    penalty: float = 0.0
    total: float = 0.0

    def to_json(self) -> dict:
        return {"connection": self.connection, "delay": self.delay,
                "penalty": self.penalty, "total": self.total}


@dataclass(frozen=True)
class Solution:
    """Pairs ``(a, b, s)`` with ``a < b``, cleared ``(id, time)``, and costs."""

    pairs: tuple = ()
    cleared: tuple = ()
    breakdown: CostBreakdown = field(default_factory=CostBreakdown)

    @classmethod
    def build(cls, pairs, cleared, seq: RequestSequence, spec: DelaySpec = LINEAR,
              penalty: float | None = None) -> "Solution":
        pairs = tuple((min(a, b), max(a, b), float(s)) for a, b, s in pairs)
        cleared = tuple((int(r), float(c)) for r, c in cleared)
        sol = cls(pairs, cleared)
        return cls(pairs, cleared, solution_cost(sol, seq, seq.metric, spec, penalty))

    @property
    def total(self) -> float:
        return self.breakdown.total

    def match_times(self, m: int) -> np.ndarray:
        s = np.full(m, np.nan)
        for a, b, t in self.pairs:
            s[a] = s[b] = t
        for r, c in self.cleared:
            s[r] = c
        return s

    def to_json(self) -> dict:
        return {"pairs": [[a, b, s] for a, b, s in self.pairs],
                "cleared": [[r, c] for r, c in self.cleared],
                "breakdown": self.breakdown.to_json()}


def solution_cost(sol: Solution, seq: RequestSequence, metric: MetricSpace | None = None,
                  spec: DelaySpec = LINEAR, penalty: float | None = None,
                  tol: float = TOL) -> CostBreakdown:
    """Cost of ``sol`` on ``seq``.

    Cleared requests are charged the penalty only: they are cleared at
    arrival, or at the last arrival for the single end-of-run clearing,
    and neither case adds delay.
    """
    metric = metric if metric is not None else seq.metric
    m = len(seq)
    seen = np.zeros(m, dtype=np.int64)
    for a, b, _ in sol.pairs:
        if a == b:
            raise DoubleCoveredRequest(f"request {a} paired with itself")
        seen[a] += 1
        seen[b] += 1
    for r, _ in sol.cleared:
        seen[r] += 1
    if (seen > 1).any():
        raise DoubleCoveredRequest(f"request {int(np.argmax(seen > 1))} covered more than once")
    if (seen == 0).any():
        raise UncoveredRequest(f"request {int(np.argmin(seen))} is not covered")
    if sol.cleared and penalty is None:
        raise ValidationError("solution clears requests but no penalty was given")

    t, loc, D = seq.arrivals, seq.locations, metric.dist
    conn, delays = [], []
    for a, b, s in sol.pairs:
        wa, wb = s - t[a], s - t[b]
        if min(wa, wb) < -tol:
            raise ValidationError(f"pair ({a}, {b}) matched at {s} before both arrived")
        conn.append(D[loc[a], loc[b]])
        delays.append(eval_delay(spec, max(wa, 0.0)))
        delays.append(eval_delay(spec, max(wb, 0.0)))
    for r, c in sol.cleared:
        if c < t[r] - tol:
            raise ValidationError(f"request {r} cleared before it arrived")
    connection = math.fsum(conn)
    delay = math.fsum(delays)
    pen = penalty * len(sol.cleared) if sol.cleared else 0.0
    return CostBreakdown(connection, delay, pen, connection + delay + pen)
