import json
from itertools import combinations

import numpy as np
import pytest

from cachenet import fixtures
from cachenet.lp import BisectionConfig
from cachenet.model import CacheAssignment, CacheScheme, assign_caches, man_load
from cachenet.scenario import TopologicalGraph, build_topological_graph, generate_layout
from cachenet.topo import (
    MAX_CENTRAL_USERS,
    RoutingInfeasible,
    alpha_to_time,
    check_solution,
    direct_programs,
    single_helper_graph,
    solve_centralized_routing,
    solve_multiround_routing,
    solve_new_decentralized_routing,
)


def scheme(L, tp):
    return CacheScheme(L, tp, tuple(combinations(range(1, L + 1), tp)))


def central_coverage_gap(sol, graph, t):
    users = graph.users
    worst = 0.0
    for S in combinations(users, t + 1):
        for k in S:
            got = sum(sol.y.get((S, h), 0.0) for h in graph.helpers_of[k])
            worst = max(worst, 1.0 - got)
    return worst


def new_coverage_gap(sol, graph, assignment, sch):
    worst = 0.0
    for k in graph.users:
        for S in combinations(range(1, sch.L + 1), sch.t_prime + 1):
            if assignment.group_of[k] in S:
                got = sum(sol.y.get((k, S, h), 0.0) for h in graph.helpers_of[k])
                worst = max(worst, abs(1.0 - got))
    return worst


@pytest.mark.parametrize("method", ["bisection", "direct"])
def test_central_reduces_to_man(method):
    for K in range(1, 8):
        for t in range(K + 1):
            g = single_helper_graph(range(1, K + 1))
            sol = solve_centralized_routing(g, t, method=method)
            assert sol.t_total == pytest.approx(float(man_load(K, t)), rel=1e-5, abs=1e-12)
            if t < K:
                assert central_coverage_gap(sol, g, t) <= 1e-9


def test_central_t0_two_helpers_grid():
    edges = [(h, k) for h in (1, 2) for k in (1, 2)]
    g = TopologicalGraph.from_edges(edges, 1.0, 1.0)
    sol = solve_centralized_routing(g, 0, method="direct")
    # each helper carries a + b of the two files and the other carries the rest
    grid = np.linspace(0, 1, 101)
    best = min(max(a + b, 2 - a - b) for a in grid for b in grid)
    assert sol.t_front == pytest.approx(best, rel=1e-6)
    assert sol.t_total == pytest.approx(best, rel=1e-6)
    assert not check_solution(sol, g)


def test_central_full_cache_and_gates():
    g = single_helper_graph([1, 2, 3])
    assert solve_centralized_routing(g, 3).t_total == 0
    with pytest.raises(ValueError):
        solve_centralized_routing(g, 1.5)
    with pytest.raises(ValueError, match="K <= 12"):
        solve_centralized_routing(single_helper_graph(range(1, MAX_CENTRAL_USERS + 2)), 1)
    lonely = TopologicalGraph({1: (1,)}, {1: (1,), 2: ()}, 1.0, 1.0)
    with pytest.raises(RoutingInfeasible):
        solve_centralized_routing(lonely, 1)


def test_new_scheme_single_user():
    g = TopologicalGraph.from_edges([(1, 1)], 1.0, 1.0)
    sol = solve_new_decentralized_routing(g, CacheAssignment({1: 1}, 2), scheme(2, 1), method="direct")
    assert sol.t_total == pytest.approx(0.5, rel=1e-9)
    assert sol.y == {(1, (1, 2), 1): pytest.approx(1.0)}


@pytest.mark.parametrize("method", ["bisection", "direct"])
def test_new_scheme_single_helper_matches_man(method):
    for L in range(1, 6):
        for tp in range(L + 1):
            g = single_helper_graph(range(1, L + 1))
            a = CacheAssignment({k: k for k in range(1, L + 1)}, L)
            sol = solve_new_decentralized_routing(g, a, scheme(L, tp), method=method)
            assert sol.t_total == pytest.approx(float(man_load(L, tp)), rel=1e-5, abs=1e-12)


def test_multiround_single_column_equals_central():
    L, tp = 4, 1
    g = TopologicalGraph.from_edges([(1, 1), (1, 2), (2, 2), (2, 3), (2, 4), (3, 4)], 1.0, 2.0)
    a = CacheAssignment({k: k for k in range(1, 5)}, L)
    mr = solve_multiround_routing(g, a, scheme(L, tp), method="direct")
    ce = solve_centralized_routing(g, tp, method="direct")
    assert len(mr.rounds) == 1
    assert mr.t_total == pytest.approx(ce.t_total, rel=1e-9)


def test_multiround_two_identical_users():
    g = single_helper_graph([1, 2])
    a = CacheAssignment({1: 1, 2: 1}, 2)
    mr = solve_multiround_routing(g, a, scheme(2, 1), method="direct")
    assert len(mr.rounds) == 2
    assert mr.rounds[0].t_total == pytest.approx(mr.rounds[1].t_total)
    assert mr.t_total == pytest.approx(2 * mr.rounds[0].t_total)


def test_bisection_agrees_with_direct():
    g = build_topological_graph(fixtures.example_layout())
    a, s = fixtures.example_assignment(), fixtures.example_scheme()
    cfg = BisectionConfig(rel_tolerance=1e-7)
    for solve in (solve_new_decentralized_routing, solve_multiround_routing):
        d = solve(g, a, s, method="direct")
        b = solve(g, a, s, method="bisection", cfg=cfg)
        assert b.t_total == pytest.approx(d.t_total, rel=2e-6)
        assert b.t_total >= d.t_total * (1 - 1e-9)
    assert solve_centralized_routing(g, 2, method="bisection").t_total == pytest.approx(
        solve_centralized_routing(g, 2, method="direct").t_total, rel=2e-6)


def test_fixture_values_and_feasibility():
    g = build_topological_graph(fixtures.example_layout())
    a, s = fixtures.example_assignment(), fixtures.example_scheme()
    new = solve_new_decentralized_routing(g, a, s, method="direct")
    mr = solve_multiround_routing(g, a, s, method="direct")
    assert new.t_total <= mr.t_total * (1 + 2e-6)
    assert new_coverage_gap(new, g, a, s) <= 1e-9
    assert not check_solution(new, g)
    assert all(v >= 0 for v in new.y.values())
    assert new.t_total == max(new.t_front, new.t_access)


def test_dominance_on_random_instances():
    s = scheme(5, 1)
    for seed in range(50):
        lay = generate_layout(seed, lambda_h=7.0, lambda_u=60.0, radius_m=400.0)
        g = build_topological_graph(lay)
        if not g.users:
            continue
        a = assign_caches(lay.K, s.L, seed)
        new = solve_new_decentralized_routing(g, a, s, method="direct")
        mr = solve_multiround_routing(g, a, s, method="direct")
        assert new.t_total <= mr.t_total * (1 + 2e-6), seed
        assert new_coverage_gap(new, g, a, s) <= 1e-9
        assert not check_solution(new, g)


def test_scale_covariance():
    g = build_topological_graph(fixtures.example_layout())
    a, s = fixtures.example_assignment(), fixtures.example_scheme()
    base = solve_new_decentralized_routing(g, a, s, F=3.0, method="direct")
    twice = solve_new_decentralized_routing(g, a, s, F=6.0, method="direct")
    assert twice.t_total == 2 * base.t_total
    fast = TopologicalGraph(g.users_of, g.helpers_of, 2 * g.c_front, 2 * g.c_access)
    half = solve_new_decentralized_routing(fast, a, s, F=3.0, method="direct")
    assert half.t_total == base.t_total / 2


def test_alpha_to_time_and_json():
    assert alpha_to_time(6.0, 3, 2.0, F=4.0) == 4.0
    g = build_topological_graph(fixtures.example_layout())
    a, s = fixtures.example_assignment(), fixtures.example_scheme()
    sol = solve_multiround_routing(g, a, s, method="direct")
    doc = json.loads(sol.to_json())
    assert set(doc) == {"scheme", "alpha", "t_front", "t_access", "t_total", "rounds"}
    assert len(doc["rounds"]) == len(sol.rounds)
    assert doc["t_total"] == pytest.approx(sum(r["t_total"] for r in doc["rounds"]))


def test_direct_programs_dump():
    g = build_topological_graph(fixtures.example_layout())
    a, s = fixtures.example_assignment(), fixtures.example_scheme()
    progs = direct_programs("multiround", g, assignment=a, scheme=s)
    assert len(progs) == len(solve_multiround_routing(g, a, s, method="direct").rounds)
    assert all("Minimize" in p.to_lp_format() for p in progs)
    with pytest.raises(ValueError):
        direct_programs("bogus", g)


def test_unknown_method():
    with pytest.raises(ValueError):
        solve_centralized_routing(single_helper_graph([1, 2]), 1, method="simplex")
