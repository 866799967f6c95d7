"""Online matching algorithms driven by arrival and match events."""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .arrivals import GenConfig, centralized_arrays
from .errors import (
    InvariantViolation,
    NonPositivePenalty,
    OddSequence,
    Unreachable,
)
from .model import LINEAR, DelaySpec, MetricSpace, RequestSequence, Solution, validate_metric
from .radius import RadiusTable

TIME_TOL = 1e-9
MAX_ITER = 200


def _scalar_delay(spec: DelaySpec):
    if spec.kind == "linear":
        return lambda w: w
    if spec.kind == "power":
        a = spec.alpha
        return lambda w: w ** a
    return lambda w: float(spec(w))


def pair_match_time(t_a: float, t_b: float, d: float, spec: DelaySpec = LINEAR) -> float:
    """Earliest t >= max(t_a, t_b) with f(t - t_a) + f(t - t_b) >= d."""
    lo = max(t_a, t_b)
    if spec.kind == "linear":
        return max((d + t_a + t_b) / 2.0, lo)
    f = _scalar_delay(spec)
    g = lambda t: f(t - t_a) + f(t - t_b)
    if g(lo) >= d:
        return lo
    if spec.bounded and 2.0 * spec.sup < d:
        raise Unreachable(f"bounded delay (sup {spec.sup}) cannot cover distance {d}")
    step = 1.0
    hi = lo + step
    for _ in range(MAX_ITER):
        if g(hi) >= d:
            break
        lo = hi
        step *= 2.0
        hi = lo + step
    else:
        raise Unreachable(f"no match time found for distance {d}")
    for _ in range(MAX_ITER):
        if hi - lo <= TIME_TOL:
            return hi
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return hi
        if g(mid) >= d:
            hi = mid
        else:
            lo = mid
    raise Unreachable("bisection did not converge")


def _require_even(seq: RequestSequence):
    if len(seq) % 2:
        raise OddSequence(f"perfect matching needs an even number of requests, got {len(seq)}")


def run_greedy(metric: MetricSpace, seq: RequestSequence, spec: DelaySpec = LINEAR) -> Solution:
    """Match two pending requests as soon as their summed delay reaches their distance.

    Simultaneous match events resolve in lexicographic order of
    (time, smaller id, larger id); an arrival is processed before match
    events scheduled at the same instant.
    """
    _require_even(seq)
    m = len(seq)
    D = metric.dist
    t = seq.arrivals.tolist()
    loc = seq.locations.tolist()
    pending: dict[int, None] = {}
    heap: list[tuple[float, int, int]] = []
    pairs = []
    i = 0
    while i < m or pending:
        nxt = t[i] if i < m else math.inf
        while heap and heap[0][0] < nxt:
            s, a, b = heapq.heappop(heap)
            if a in pending and b in pending:
                del pending[a]
                del pending[b]
                pairs.append((a, b, s))
        if i == m:
            if pending:
                raise Unreachable("pending requests can never be matched under this delay function")
            break
        x = loc[i]
        for q in pending:
            try:
                s = pair_match_time(t[q], t[i], D[loc[q], x], spec)
            except Unreachable:
                continue
            heapq.heappush(heap, (s, q, i))
        pending[i] = None
        i += 1
    return Solution.build(pairs, (), seq, spec)


def _radius_partner(x, pending, D, rho, restrict=None):
    """Algorithm-2 partner choice for an arrival at x, or None."""
    cover = [q for q, y in pending.items() if D[x, y] <= rho[y]]
    if len(cover) > 1:
        raise InvariantViolation(
            f"arrival at point {x} lies in the balls of pending requests {cover}")
    if cover:
        return cover[0]
    near = [(D[x, y], q) for q, y in pending.items() if D[x, y] <= rho[y] + rho[x]]
    return min(near)[1] if near else None


def _check_disjoint(pending, D, rho):
    items = list(pending.items())
    for k, (a, ya) in enumerate(items):
        for b, yb in items[k + 1:]:
            if not D[ya, yb] > rho[ya] + rho[yb]:
                raise InvariantViolation(
                    f"pending requests {a} and {b} have overlapping balls")


def run_radius(metric: MetricSpace, seq: RequestSequence, rtab: RadiusTable,
               check: bool = False) -> Solution:
    """Match on arrival when balls overlap; pair leftovers at the last arrival.

    Leftovers are paired in arrival order.  ``check`` re-verifies the
    pending-ball disjointness after every arrival.
    """
    _require_even(seq)
    if len(rtab) != metric.n:
        raise ValueError("radius table does not match the metric")
    m = len(seq)
    D, rho = metric.dist, rtab.rho
    t = seq.arrivals.tolist()
    loc = seq.locations.tolist()
    pending: dict[int, int] = {}
    pairs = []
    for i in range(m):
        x = loc[i]
        q = _radius_partner(x, pending, D, rho)
        if q is None:
            pending[i] = x
        else:
            del pending[q]
            pairs.append((q, i, t[i]))
        if check:
            _check_disjoint(pending, D, rho)
    late = list(pending)
    end = t[-1] if m else 0.0
    pairs.extend((a, b, end) for a, b in zip(late[::2], late[1::2]))
    return Solution.build(pairs, (), seq, rtab.spec)


def run_mpmdfp(metric: MetricSpace, seq: RequestSequence, rtab: RadiusTable,
               penalty: float, check: bool = False) -> Solution:
    """Radius with free disposal at fixed ``penalty``.

    Points with radius below the penalty run the Radius rules.  An arrival
    at any other point joins a pending request whose closed ball covers it,
    or is cleared on the spot.  An odd leftover at the end clears the most
    recently arrived pending request.
    """
    if not penalty > 0:
        raise NonPositivePenalty(f"penalty must be positive, got {penalty!r}")
    m = len(seq)
    D, rho = metric.dist, rtab.rho
    cheap = rho < penalty
    t = seq.arrivals.tolist()
    loc = seq.locations.tolist()
    pending: dict[int, int] = {}
    pairs, cleared = [], []
    for i in range(m):
        x = loc[i]
        if cheap[x]:
            q = _radius_partner(x, pending, D, rho)
            if q is None:
                pending[i] = x
                if check:
                    _check_disjoint(pending, D, rho)
                continue
        else:
            cover = [q for q, y in pending.items() if D[x, y] <= rho[y]]
            if len(cover) > 1:
                raise InvariantViolation(
                    f"arrival at point {x} lies in the balls of pending requests {cover}")
            if not cover:
                cleared.append((i, t[i]))
                continue
            q = cover[0]
        del pending[q]
        pairs.append((q, i, t[i]))
    late = list(pending)
    end = t[-1] if m else 0.0
    if len(late) % 2:
        cleared.append((late.pop(), end))
    pairs.extend((a, b, end) for a, b in zip(late[::2], late[1::2]))
    return Solution.build(pairs, cleared, seq, rtab.spec, penalty)


@dataclass(frozen=True)
class BipartiteRun:
    pending: np.ndarray  # P_i right after the i-th arrival
    gaps: np.ndarray     # W_i, time from arrival i to arrival i+1
    cost: float          # sum_{i<m} P_i * W_i
    pairs: tuple
    unmatched: tuple


def bipartite_metric(rate_a: float = 0.5, rate_b: float = 0.5) -> MetricSpace:
    """Two points, zero cross distance, same-colour matching forbidden."""
    inf = math.inf
    return validate_metric([[inf, 0.0], [0.0, inf]], [rate_a, rate_b], ("a", "b"),
                           allow_non_metric=True)


def run_bipartite_greedy(rate_a: float = 0.5, rate_b: float = 0.5, m: int = 1000,
                         seed: int = 0, colors=None) -> BipartiteRun:
    """Greedy red/blue matching on the two-point instance.

    ``colors`` injects a deterministic 0/1 location sequence; arrival gaps
    stay random.
    """
    metric = bipartite_metric(rate_a, rate_b)
    cfg = GenConfig(metric, m, seed, allow_odd=True)
    times, locs = centralized_arrays(cfg.metric, cfg.m, cfg.seed)
    if colors is not None:
        locs = np.asarray(colors, dtype=np.int64)[:m]
    times = times.tolist()
    queues = (deque(), deque())
    pending = np.empty(m, dtype=np.int64)
    pairs = []
    for i, c in enumerate(locs.tolist()):
        other = queues[1 - c]
        if other:
            pairs.append((other.popleft(), i, times[i]))
        else:
            queues[c].append(i)
        pending[i] = len(queues[0]) + len(queues[1])
    gaps = np.diff(np.asarray(times))
    cost = math.fsum((pending[:-1] * gaps).tolist())
    unmatched = tuple(sorted(queues[0] + queues[1]))
    return BipartiteRun(pending, gaps, cost, tuple(pairs), unmatched)


# --- post-hoc certificates -------------------------------------------------

def greedy_certificate(metric: MetricSpace, seq: RequestSequence, spec: DelaySpec,
                       sol: Solution, tol: float = 1e-6) -> None:
    """Raise InvariantViolation unless ``sol`` is exactly what Greedy does.

    Every pair is matched at its own criterion time, and no two requests
    that were simultaneously pending met the criterion earlier than the
    first of their match times.
    """
    D, t, loc = metric.dist, seq.arrivals, seq.locations
    f = _scalar_delay(spec)
    s = sol.match_times(len(seq))
    for a, b, st in sol.pairs:
        d = D[loc[a], loc[b]]
        if f(st - t[a]) + f(st - t[b]) < d - tol:
            raise InvariantViolation(f"pair ({a}, {b}) matched before its criterion holds")
        if abs(pair_match_time(t[a], t[b], d, spec) - st) > tol:
            raise InvariantViolation(f"pair ({a}, {b}) matched later than its criterion time")
    m = len(seq)
    for a in range(m):
        for b in range(a + 1, m):
            if t[b] >= s[a]:
                break
            end = min(s[a], s[b])
            if t[b] >= end:
                continue
            try:
                due = pair_match_time(t[a], t[b], D[loc[a], loc[b]], spec)
            except Unreachable:
                continue
            if due < end - tol:
                raise InvariantViolation(
                    f"requests {a} and {b} were both pending at {due} when the criterion held")


def radius_certificate(metric: MetricSpace, seq: RequestSequence, rtab: RadiusTable,
                       sol: Solution, tol: float = 1e-9) -> None:
    """Nice pairs respect the sum-of-radii rule; late requests sit on distinct,
    mutually far points."""
    D, rho, loc = metric.dist, rtab.rho, seq.locations
    m = len(seq)
    end = seq.last_arrival
    late = []
    for a, b, s in sol.pairs:
        ya, yb = loc[a], loc[b]
        within = D[ya, yb] <= rho[ya] + rho[yb] + tol
        if s < end and not within:
            raise InvariantViolation(f"nice pair ({a}, {b}) is farther than its radii allow")
        # at the last arrival only the pair containing r_m can be nice
        if s >= end and not (b == m - 1 and within):
            late.extend((a, b))
    late_locs = [int(loc[r]) for r in late]
    if len(set(late_locs)) != len(late_locs):
        raise InvariantViolation("two late requests share a location")
    for i, x in enumerate(late_locs):
        for y in late_locs[i + 1:]:
            if D[x, y] <= rho[x] + rho[y]:
                raise InvariantViolation("late requests have overlapping balls")
