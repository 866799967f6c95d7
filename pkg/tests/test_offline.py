import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpmd.arrivals import GenConfig, generate, random_metric
from mpmd.blossom import certificate_gaps, max_weight_matching
from mpmd.errors import Infeasible, TooLarge, ValidationError
from mpmd.model import DelaySpec, RequestSequence, validate_metric
from mpmd.offline import (
    FORBIDDEN,
    MatchInstance,
    brute_force_fp,
    edge_weight,
    instance_from_sequence,
    min_total_cost,
    offline_solution,
    opt_half_sum_bound,
    optimal_solution,
    shadow_instance,
    solve_opt_blossom,
    solve_opt_dp,
    solve_opt_fp,
)
from mpmd.online import run_greedy, run_mpmdfp, run_radius
from mpmd.radius import radius_table


def random_instance(rng, n, forbid=0.0):
    W = rng.uniform(0, 10, (n, n))
    W = np.triu(W, 1)
    W = W + W.T
    if forbid:
        mask = np.triu(rng.random((n, n)) < forbid, 1)
        W[mask | mask.T] = FORBIDDEN
    return MatchInstance(W)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 16), st.booleans())
def test_blossom_agrees_with_networkx(seed, n, maxcard):
    rng = np.random.default_rng(seed)
    edges = [(i, j, float(rng.uniform(0, 10))) for i in range(n) for j in range(i + 1, n)
             if rng.random() < 0.5]
    res = max_weight_matching(n, edges, maxcard)
    g = nx.Graph()
    g.add_weighted_edges_from(edges)
    ref = nx.max_weight_matching(g, maxcardinality=maxcard)
    w = {frozenset((i, j)): x for i, j, x in edges}
    assert sum(w[frozenset(e)] for e in res.pairs) == pytest.approx(
        sum(w[frozenset(e)] for e in ref), abs=1e-9)
    if maxcard:
        assert len(res.pairs) == len(ref)


def test_certificate_detects_a_bad_dual():
    W = np.array([[0, 3.0], [3.0, 0]])
    res = max_weight_matching(2, [(0, 1, 3.0)], True)
    ok = certificate_gaps(res, W, np.ones((2, 2), bool) & ~np.eye(2, dtype=bool))
    assert ok["dual_feasibility"] <= 1e-12 and ok["slackness"] <= 1e-12
    bad = type(res)(res.mate, [0.0, 0.0], res.blossoms, res.parent)
    assert certificate_gaps(bad, W, ~np.eye(2, dtype=bool))["dual_feasibility"] > 0


def test_instance_validation():
    with pytest.raises(ValidationError):
        MatchInstance(np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        MatchInstance(np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValidationError):
        MatchInstance(np.array([[0, -1], [-1, 0]]))


def test_edge_weight_examples(two_points):
    metric, seq = two_points
    a, b = seq.requests
    assert edge_weight(a, b, metric) == 2.0
    m2 = validate_metric([[0, 1], [1, 0]], [1, 1])
    s2 = RequestSequence.from_pairs(m2, [(0, 0.0), (1, 3.0)])
    assert edge_weight(*s2.requests, m2, DelaySpec.power(2)) == 10.0
    s3 = RequestSequence.from_pairs(m2, [(0, 0.0), (1, 1e-12)])
    assert edge_weight(*s3.requests, m2) == pytest.approx(1.0)


def test_dp_examples():
    res = solve_opt_dp(MatchInstance([[0, 4], [4, 0]]))
    assert (res.weight, res.pairs) == (4.0, [(0, 1)])
    W = np.full((4, 4), 5.0)
    W[0, 1] = W[1, 0] = W[2, 3] = W[3, 2] = 10
    W[0, 2] = W[2, 0] = W[1, 3] = W[3, 1] = 1
    res = solve_opt_dp(MatchInstance(W))
    assert res.weight == 2.0 and sorted(res.pairs) == [(0, 2), (1, 3)]
    # two of each colour, same-colour edges forbidden
    B = np.array([[0, FORBIDDEN, 1, 2], [FORBIDDEN, 0, 3, 1], [1, 3, 0, FORBIDDEN],
                  [2, 1, FORBIDDEN, 0]])
    assert solve_opt_dp(MatchInstance(B)).pairs == [(0, 2), (1, 3)]
    assert solve_opt_blossom(MatchInstance(B)).pairs == [(0, 2), (1, 3)]


def test_dp_size_limit():
    with pytest.raises(TooLarge):
        solve_opt_dp(MatchInstance(np.ones((22, 22))))


def test_infeasible_instances():
    W = np.full((4, 4), FORBIDDEN)
    W[0, 1] = W[1, 0] = 1.0
    for solve in (solve_opt_dp, solve_opt_blossom):
        with pytest.raises(Infeasible):
            solve(MatchInstance(W))
    big = np.full((80, 80), FORBIDDEN)
    big[:3, :3] = 1.0
    with pytest.raises(Infeasible):
        solve_opt_blossom(MatchInstance(big))


@pytest.mark.parametrize("exact", [False, True])
def test_blossom_matches_dp(exact):
    rng = np.random.default_rng(42)
    for _ in range(150):
        inst = random_instance(rng, 2 * int(rng.integers(1, 7)), forbid=0.2)
        try:
            ref = solve_opt_dp(inst).weight
        except Infeasible:
            with pytest.raises(Infeasible):
                solve_opt_blossom(inst, exact_int=exact)
            continue
        assert solve_opt_blossom(inst, exact_int=exact).weight == pytest.approx(ref, abs=1e-6)


def test_all_equal_weights():
    assert solve_opt_blossom(MatchInstance(np.full((10, 10), 2.5))).weight == pytest.approx(12.5)


def test_sparse_pricing_reaches_dense_optimum():
    metric = random_metric(10, seed=8)
    seq = generate(GenConfig(metric, 160, 2))
    inst = instance_from_sequence(seq)
    sparse = solve_opt_blossom(inst, k=2).weight
    g = nx.Graph()
    W = inst.weights
    g.add_weighted_edges_from((i, j, -W[i, j]) for i in range(160) for j in range(i + 1, 160))
    ref = -sum(g[a][b]["weight"] for a, b in nx.max_weight_matching(g, maxcardinality=True))
    assert sparse == pytest.approx(ref, abs=1e-9)


def test_opt_dominates_online_algorithms():
    metric = random_metric(10, seed=11)
    rtab = radius_table(metric)
    seq = generate(GenConfig(metric, 200, 5))
    opt = optimal_solution(seq)
    assert opt.total <= run_greedy(metric, seq).total
    assert opt.total <= run_radius(metric, seq, rtab).total


def test_offline_solution_cost_reproduces_weight():
    metric = random_metric(6, seed=1)
    seq = generate(GenConfig(metric, 40, 3))
    res = solve_opt_blossom(instance_from_sequence(seq))
    sol = offline_solution(seq, res)
    assert sol.total == pytest.approx(res.weight, rel=1e-12)


def test_exact_int_weight_equals_float_weight():
    metric = random_metric(8, seed=2)
    seq = generate(GenConfig(metric, 100, 4))
    inst = instance_from_sequence(seq)
    assert solve_opt_blossom(inst, exact_int=True).weight == pytest.approx(
        solve_opt_blossom(inst).weight, abs=1e-6)


def test_fp_extremes():
    metric = random_metric(6, seed=3)
    seq = generate(GenConfig(metric, 20, 1))
    W = instance_from_sequence(seq).weights
    tiny = 0.49 * float(W[np.isfinite(W)].min())
    res = solve_opt_fp(seq, p=tiny)
    assert len(res.cleared) == 20 and res.weight == pytest.approx(20 * tiny)
    plain = solve_opt_blossom(instance_from_sequence(seq)).weight
    assert solve_opt_fp(seq, p=1e6).weight == pytest.approx(plain, abs=1e-9)
    assert solve_opt_fp(seq, p=math.inf).weight == plain


@pytest.mark.parametrize("seed", range(40))
def test_fp_matches_exhaustive_and_shadow_nodes(seed):
    metric = random_metric(5, seed=seed)
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5)) * 2
    seq = generate(GenConfig(metric, m, seed))
    p = float(rng.uniform(0.05, 1.5))
    res = solve_opt_fp(seq, p=p)
    assert res.weight == pytest.approx(brute_force_fp(instance_from_sequence(seq), p), abs=1e-9)
    assert res.weight == pytest.approx(solve_opt_blossom(shadow_instance(seq, p=p)).weight, abs=1e-9)


def test_fp_opt_dominates_mpmdfp():
    metric = random_metric(10, seed=12)
    rtab = radius_table(metric)
    p = float(np.median(rtab.rho))
    for seed in range(5):
        seq = generate(GenConfig(metric, 100, seed))
        assert solve_opt_fp(seq, p=p).weight <= run_mpmdfp(metric, seq, rtab, p).total + 1e-9


def test_min_total_cost_examples(two_points):
    metric, seq = two_points
    assert min_total_cost(seq, 0) == 2.0 and min_total_cost(seq, 1) == 2.0
    assert min_total_cost(seq, 0, p=1.0) == 1.0
    one = validate_metric([[0]], [1])
    s = RequestSequence.from_pairs(one, [(0, 0.0), (0, 1e-6), (0, 5.0)])
    assert min_total_cost(s, 0) == pytest.approx(1e-6)


def test_half_sum_examples(two_points):
    _, seq = two_points
    assert opt_half_sum_bound(seq) == 2.0 == optimal_solution(seq).total
    one = validate_metric([[0]], [1])
    s = RequestSequence.from_pairs(one, [(0, 0.0), (0, 1.0)])
    assert opt_half_sum_bound(s) == 1.0 == optimal_solution(s).total


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([None, 0.05, 0.3]))
def test_half_sum_is_a_lower_bound(seed, p):
    metric = random_metric(6, seed=seed % 1000)
    seq = generate(GenConfig(metric, 30, seed))
    opt = solve_opt_fp(seq, p=p if p else math.inf).weight
    assert opt_half_sum_bound(seq, p=p) <= opt + 1e-6
