"""Offline optimum: minimum-weight perfect matching over requests.

The weight of pairing two requests is their distance plus the delay of
the earlier one waiting for the later one, ``d + f(|dt|)``.  A bitmask DP
serves as an exhaustive oracle for small instances; the blossom solver
handles the rest.

For large instances the blossom solver first runs on a sparse candidate
graph (each node's cheapest neighbours plus arrival-order chain edges) and
then prices every remaining edge against the returned duals.  Edges with
negative reduced cost are added and the solve repeats, so the final
answer carries a dual certificate for the full graph.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .blossom import certificate_gaps, max_weight_matching, reduced_costs
from .errors import Infeasible, InvariantViolation, NonPositivePenalty, TooLarge, ValidationError
from .model import LINEAR, DelaySpec, MetricSpace, RequestSequence, Solution, eval_delay

FORBIDDEN = math.inf
DP_MAX_NODES = 20
DENSE_MAX_NODES = 64
CANDIDATES_PER_NODE = 10
INT_SCALE = 10 ** 9
SLACK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MatchInstance:
    """Symmetric non-negative weights; ``FORBIDDEN`` marks a missing edge."""

    weights: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError("weight matrix must be square")
        n = W.shape[0]
        if n % 2:
            raise ValidationError(f"need an even node count, got {n}")
        np.fill_diagonal(W, FORBIDDEN)
        if np.isnan(W).any() or (W < 0).any():
            raise ValidationError("weights must be non-negative")
        if np.isneginf(W).any():
            raise ValidationError("weights must be finite or FORBIDDEN")
        if not np.array_equal(W, W.T):
            raise ValidationError("weight matrix must be symmetric")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def allowed(self) -> np.ndarray:
        return np.isfinite(self.weights)


class OptResult(NamedTuple):
    weight: float
    pairs: list
    cleared: tuple = ()


def edge_weight(r, r2, metric: MetricSpace, spec: DelaySpec = LINEAR) -> float:
    """``d + f(|dt|)`` for two requests; pairing at the later arrival is optimal."""
    if r.id == r2.id:
        raise ValidationError("edge weight needs two distinct requests")
    d = float(metric.dist[r.location, r2.location])
    return d + float(eval_delay(spec, abs(r.arrival - r2.arrival)))


def instance_from_sequence(seq: RequestSequence, metric: MetricSpace | None = None,
                           spec: DelaySpec = LINEAR) -> MatchInstance:
    metric = metric if metric is not None else seq.metric
    loc, t = seq.locations, seq.arrivals
    D = metric.dist[np.ix_(loc, loc)]
    dt = np.abs(t[:, None] - t[None, :])
    return MatchInstance(D + eval_delay(spec, dt))


def _pairs_weight(W: np.ndarray, pairs) -> float:
    return math.fsum(float(W[a, b]) for a, b in pairs)


def solve_opt_dp(inst: MatchInstance) -> OptResult:
    """Exact minimum perfect matching by DP over subsets (oracle, n <= 20)."""
    n = inst.n
    if n > DP_MAX_NODES:
        raise TooLarge(f"DP oracle handles at most {DP_MAX_NODES} nodes, got {n}")
    W = inst.weights.tolist()
    full = (1 << n) - 1

    @lru_cache(maxsize=None)
    def best(mask):
        if mask == full:
            return 0.0, None
        i = 0
        while mask >> i & 1:
            i += 1
        choice = (math.inf, None)
        for j in range(i + 1, n):
            if mask >> j & 1 or not math.isfinite(W[i][j]):
                continue
            rest = best(mask | 1 << i | 1 << j)[0]
            cand = W[i][j] + rest
            if cand < choice[0]:
                choice = (cand, j)
        return choice

    if not math.isfinite(best(0)[0]):
        raise Infeasible("no perfect matching avoids the forbidden edges")
    pairs = []
    mask = 0
    while mask != full:
        i = 0
        while mask >> i & 1:
            i += 1
        j = best(mask)[1]
        pairs.append((i, j))
        mask |= 1 << i | 1 << j
    return OptResult(_pairs_weight(inst.weights, pairs), pairs)


def _candidate_mask(W: np.ndarray, allowed: np.ndarray, k: int) -> np.ndarray:
    n = W.shape[0]
    if n <= DENSE_MAX_NODES:
        return allowed.copy()
    kk = min(k, n - 1)
    near = np.argpartition(W, kk - 1, axis=1)[:, :kk]
    mask = np.zeros_like(allowed)
    rows = np.repeat(np.arange(n), kk)
    mask[rows, near.ravel()] = True
    idx = np.arange(n - 1)
    mask[idx, idx + 1] = True
    mask |= mask.T
    return mask & allowed


def _edge_list(Wt: np.ndarray, mask: np.ndarray):
    iu, ju = np.nonzero(np.triu(mask, 1))
    vals = Wt[iu, ju].tolist()
    return list(zip(iu.tolist(), ju.tolist(), vals))


def _transformed(W: np.ndarray, allowed: np.ndarray, exact_int: bool, perfect: bool,
                 cap: float | None = None):
    """Maximisation weights: ``C - w`` for perfect mode, ``cap - w`` otherwise."""
    if exact_int:
        scaled = np.rint(np.where(allowed, W, 0.0) * INT_SCALE).astype(np.int64)
        if perfect:
            base = int(scaled[allowed].max()) + 1 if allowed.any() else 1
        else:
            base = int(round(cap * INT_SCALE))
        return np.where(allowed, base - scaled, 0), 0.5
    if perfect:
        base = float(W[allowed].max()) + 1.0 if allowed.any() else 1.0
    else:
        base = cap
    return np.where(allowed, base - np.where(allowed, W, 0.0), 0.0), SLACK_TOL * max(1.0, abs(base))


def _solve_max(W: np.ndarray, allowed: np.ndarray, exact_int: bool, perfect: bool,
               cap: float | None, k: int, check: bool):
    """Shared sparse-then-price loop; returns the matched pairs."""
    n = W.shape[0]
    Wt, tol = _transformed(W, allowed, exact_int, perfect, cap)
    cand = _candidate_mask(W, allowed, k)
    for _ in range(n * n + 1):
        result = max_weight_matching(n, _edge_list(Wt, cand), maxcardinality=perfect)
        pairs = result.pairs
        if perfect and 2 * len(pairs) != n:
            if cand.sum() == allowed.sum():
                raise Infeasible("no perfect matching avoids the forbidden edges")
            cand = allowed.copy()
            continue
        gaps = certificate_gaps(result, np.asarray(Wt, dtype=float), allowed, perfect=perfect)
        if gaps["dual_feasibility"] <= tol:
            if check and (gaps["slackness"] > tol or gaps["blossom"] > 0 or gaps["vertex"] > tol):
                raise InvariantViolation(f"matching certificate failed: {gaps}")
            return pairs
        if np.array_equal(cand, allowed):
            raise InvariantViolation(f"dual infeasible on the full graph: {gaps}")
        S = reduced_costs(result, np.asarray(Wt, dtype=float))
        cand |= allowed & (S < -tol)
    raise InvariantViolation("pricing loop did not terminate")


def solve_opt_blossom(inst: MatchInstance, exact_int: bool = False,
                      k: int = CANDIDATES_PER_NODE, check: bool = True) -> OptResult:
    """Minimum-weight perfect matching by the primal-dual blossom method.

    ``exact_int`` rounds weights to multiples of 1e-9 and solves in
    integers; the reported weight is always summed from the original
    weights.  With ``check`` the dual certificate is validated.
    """
    n = inst.n
    if n == 0:
        return OptResult(0.0, [])
    W, allowed = inst.weights, inst.allowed
    pairs = _solve_max(W, allowed, exact_int, True, None, k, check)
    return OptResult(_pairs_weight(W, pairs), sorted(pairs))


def solve_opt_fp(seq: RequestSequence, metric: MetricSpace | None = None,
                 spec: DelaySpec = LINEAR, p: float = math.inf, exact_int: bool = False,
                 check: bool = True) -> OptResult:
    """Offline optimum when any request may be cleared at cost ``p``.

    Pairing (i, j) instead of clearing both saves ``2p - w(i, j)``, so the
    optimum is ``m * p`` minus a maximum-weight (not necessarily perfect)
    matching on the savings.  ``p = inf`` reduces to the plain problem.
    """
    if not p > 0:
        raise NonPositivePenalty(f"penalty must be positive, got {p!r}")
    inst = instance_from_sequence(seq, metric, spec)
    if math.isinf(p):
        res = solve_opt_blossom(inst, exact_int, check=check)
        return OptResult(res.weight, res.pairs)
    W = inst.weights
    m = inst.n
    allowed = W < 2.0 * p
    pairs = sorted(_solve_max(W, allowed, exact_int, False, 2.0 * p, CANDIDATES_PER_NODE, check))
    used = {v for e in pairs for v in e}
    cleared = [r for r in range(m) if r not in used]
    weight = math.fsum([_pairs_weight(W, pairs), p * len(cleared)])
    return OptResult(weight, pairs, tuple(cleared))


def shadow_instance(seq: RequestSequence, metric: MetricSpace | None = None,
                    spec: DelaySpec = LINEAR, p: float = 1.0) -> MatchInstance:
    """Perfect-matching form of the penalty problem on 2m nodes.

    Node ``m + i`` shadows request ``i``: request-shadow costs ``p``,
    shadow-shadow costs 0, and a request matched to its own shadow is
    cleared.
    """
    base = instance_from_sequence(seq, metric, spec).weights
    m = base.shape[0]
    W = np.full((2 * m, 2 * m), FORBIDDEN)
    W[:m, :m] = base
    idx = np.arange(m)
    W[idx, m + idx] = W[m + idx, idx] = p
    W[m:, m:] = 0.0
    return MatchInstance(W)


def brute_force_fp(inst: MatchInstance, p: float) -> float:
    """Exhaustive minimum over (pairing, cleared set) choices; odd counts allowed."""
    W = inst.weights.tolist()
    n = inst.n
    if n > DP_MAX_NODES:
        raise TooLarge(f"exhaustive oracle handles at most {DP_MAX_NODES} nodes")
    full = (1 << n) - 1

    @lru_cache(maxsize=None)
    def best(mask):
        if mask == full:
            return 0.0
        i = 0
        while mask >> i & 1:
            i += 1
        out = p + best(mask | 1 << i)
        for j in range(i + 1, n):
            if not mask >> j & 1 and math.isfinite(W[i][j]):
                out = min(out, W[i][j] + best(mask | 1 << i | 1 << j))
        return out

    return best(0)


def offline_solution(seq: RequestSequence, res: OptResult, spec: DelaySpec = LINEAR,
                     p: float | None = None) -> Solution:
    """Timestamp each pair at its later arrival and clear at arrival."""
    t = seq.arrivals
    pairs = [(a, b, max(t[a], t[b])) for a, b in res.pairs]
    cleared = [(r, t[r]) for r in res.cleared]
    return Solution.build(pairs, cleared, seq, spec, p if cleared else None)


def optimal_solution(seq: RequestSequence, spec: DelaySpec = LINEAR, p: float | None = None,
                     exact_int: bool = False) -> Solution:
    if p is None or math.isinf(p):
        res = solve_opt_blossom(instance_from_sequence(seq, spec=spec), exact_int)
        return offline_solution(seq, res, spec)
    return offline_solution(seq, solve_opt_fp(seq, spec=spec, p=p, exact_int=exact_int), spec, p)


def min_total_cost(seq: RequestSequence, r: int, metric: MetricSpace | None = None,
                   spec: DelaySpec = LINEAR, p: float | None = None) -> float:
    """Cheapest way to serve request ``r`` alone: nearest partner, capped at ``p``."""
    if len(seq) < 2:
        raise ValidationError("need at least two requests")
    metric = metric if metric is not None else seq.metric
    loc, t = seq.locations, seq.arrivals
    w = metric.dist[loc[r], loc] + eval_delay(spec, np.abs(t - t[r]))
    w = np.delete(w, r)
    c = float(w.min())
    return min(c, p) if p is not None else c


def opt_half_sum_bound(seq: RequestSequence, metric: MetricSpace | None = None,
                       spec: DelaySpec = LINEAR, p: float | None = None) -> float:
    """Half the sum of per-request minimum costs; a lower bound on OPT."""
    if len(seq) % 2 and p is None:
        raise ValidationError("perfect matching needs an even number of requests")
    return 0.5 * math.fsum(min_total_cost(seq, r, metric, spec, p) for r in range(len(seq)))
