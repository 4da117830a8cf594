from itertools import combinations, product
from math import comb

import numpy as np
import pytest

from cachenet import fixtures
from cachenet.collision import (
    MAX_EXACT_COLORING,
    Association,
    Coloring,
    ExactSolveUnavailable,
    associate_exact,
    associate_greedy,
    associate_random,
    color_dsatur,
    color_exact,
    reuse_delivery_time,
)
from cachenet.model import CacheAssignment, CacheScheme
from cachenet.scenario import (
    CollisionGraph,
    HelperConflictGraph,
    build_collision_graph,
    build_helper_conflict_graph,
)


def graph(n, edges):
    return HelperConflictGraph(tuple(range(1, n + 1)), frozenset(tuple(sorted(e)) for e in edges))


def chromatic_brute(g):
    vs = list(g.vertices)
    if not vs:
        return 0
    for r in range(1, len(vs) + 1):
        for cols in product(range(r), repeat=len(vs)):
            c = dict(zip(vs, cols))
            if all(c[i] != c[j] for i, j in g.edges):
                return r
    return len(vs)


def geometric_graph(rng, n, radius):
    pts = rng.random((n, 2))
    edges = [(i + 1, j + 1) for i, j in combinations(range(n), 2) if np.linalg.norm(pts[i] - pts[j]) <= radius]
    return graph(n, edges)


def scheme(L, tp):
    return CacheScheme(L, tp, tuple(combinations(range(1, L + 1), tp)))


def slots_oracle(occupancies, L, tp):
    """Column-by-column XOR count of the left-justified delivery array."""
    occ = sorted(occupancies, reverse=True) + [0] * (L - len(occupancies))
    total = 0
    for j in range(max(occ, default=0)):
        present = {i for i in range(L) if occ[i] > j}
        total += sum(1 for S in combinations(range(L), tp + 1) if set(S) & present)
    return total


def assoc_brute(cg, assignment, sch):
    choices = [cg.solid_of[k] for k in cg.users]
    best = None
    for pick in product(*choices):
        occ = {}
        for k, h in zip(cg.users, pick):
            occ.setdefault(h, [0] * sch.L)[assignment.group_of[k] - 1] += 1
        val = max(slots_oracle(o, sch.L, sch.t_prime) for o in occ.values())
        best = val if best is None else min(best, val)
    return best


def random_collision(rng, H, K, L, max_deg=3):
    solid, dashed = set(), set()
    for k in range(1, K + 1):
        hs = rng.choice(np.arange(1, H + 1), size=int(rng.integers(1, min(max_deg, H) + 1)), replace=False)
        solid.update((int(h), k) for h in hs)
        for h in range(1, H + 1):
            if (h, k) not in solid and rng.random() < 0.2:
                dashed.add((h, k))
    cg = CollisionGraph(tuple(range(1, H + 1)), tuple(range(1, K + 1)), frozenset(solid), frozenset(dashed))
    groups = {k: int(rng.integers(1, L + 1)) for k in range(1, K + 1)}
    return cg, CacheAssignment(groups, L)


def test_small_colorings():
    tri = graph(3, [(1, 2), (2, 3), (1, 3)])
    assert color_exact(tri).r == 3 and color_dsatur(tri).r == 3
    c6 = graph(6, [(i, i % 6 + 1) for i in range(1, 7)])
    assert color_exact(c6).r == 2 and color_dsatur(c6).r == 2
    bip = graph(7, [(1, 5), (1, 6), (2, 6), (2, 7), (3, 5), (4, 7), (3, 7)])
    assert color_dsatur(bip).r == 2
    assert color_exact(graph(3, [])).r == 1
    assert color_exact(graph(0, [])).r == 0


def test_fixture_coloring():
    g = build_helper_conflict_graph(build_collision_graph(fixtures.example_layout()))
    for col in (color_exact(g), color_dsatur(g)):
        assert col.r == 3 and col.is_valid(g)
    assert chromatic_brute(g) == 3


def test_exact_coloring_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(40):
        n = int(rng.integers(2, 8))
        g = geometric_graph(rng, n, float(rng.uniform(0.3, 0.8)))
        col = color_exact(g)
        assert col.is_valid(g)
        assert sorted(set(col.color_of.values())) == list(range(1, col.r + 1))
        assert col.r == chromatic_brute(g)


def test_dsatur_vs_exact_on_sparse_graphs():
    rng = np.random.default_rng(1)
    equal = 0
    for _ in range(50):
        g = geometric_graph(rng, int(rng.integers(10, 21)), 0.25)
        d, e = color_dsatur(g), color_exact(g)
        assert d.is_valid(g) and e.is_valid(g)
        assert d.r >= e.r
        equal += d.r == e.r
    assert equal >= 45


def test_exact_coloring_size_gate():
    with pytest.raises(ExactSolveUnavailable, match="color_dsatur"):
        color_exact(graph(MAX_EXACT_COLORING + 1, []))


def test_greedy_example_association():
    cg = build_collision_graph(fixtures.example_layout())
    a, s = fixtures.example_assignment(), fixtures.example_scheme()
    g = associate_greedy(cg, a, s)
    assert (g.helper_of[3], g.helper_of[4], g.helper_of[6]) == (2, 4, 4)
    assert g.is_valid(cg)
    assert g.max_slots(s.t_prime) == 3
    ex = associate_exact(cg, a, s)
    assert ex.max_slots(s.t_prime) == 3 == assoc_brute(cg, a, s)


def test_single_homed_users_are_forced():
    cg = CollisionGraph((1, 2), (1, 2, 3), frozenset({(1, 1), (2, 2), (2, 3)}), frozenset({(1, 2)}))
    a = CacheAssignment({1: 1, 2: 2, 3: 1}, 2)
    s = scheme(2, 1)
    want = {1: 1, 2: 2, 3: 2}
    assert associate_greedy(cg, a, s).helper_of == want
    assert associate_exact(cg, a, s).helper_of == want
    assert associate_random(cg, a, 5).helper_of == want


def test_exact_association_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(25):
        L = int(rng.integers(2, 5))
        tp = int(rng.integers(0, L))
        cg, a = random_collision(rng, int(rng.integers(2, 5)), int(rng.integers(3, 9)), L)
        s = scheme(L, tp)
        ex = associate_exact(cg, a, s)
        gr = associate_greedy(cg, a, s)
        assert ex.is_valid(cg) and gr.is_valid(cg)
        want = assoc_brute(cg, a, s)
        assert ex.max_slots(tp) == want
        assert gr.max_slots(tp) >= want
        for h, n in ex.slots(tp).items():
            assert n == slots_oracle(ex.occupancies(h), L, tp)


def test_exact_association_gates():
    rng = np.random.default_rng(3)
    cg, a = random_collision(rng, 3, 6, 7)
    with pytest.raises(ExactSolveUnavailable, match="associate_greedy"):
        associate_exact(cg, a, scheme(7, 1))
    solid = frozenset((h, k) for k in range(1, 17) for h in (1, 2))
    cg = CollisionGraph((1, 2), tuple(range(1, 17)), solid, frozenset())
    with pytest.raises(ExactSolveUnavailable):
        associate_exact(cg, CacheAssignment({k: 1 for k in range(1, 17)}, 2), scheme(2, 1))


def test_random_association_deterministic_and_ensemble():
    rng = np.random.default_rng(4)
    cg, a = random_collision(rng, 4, 14, 3)
    s = scheme(3, 1)
    assert associate_random(cg, a, 7) == associate_random(cg, a, 7)
    assert associate_random(cg, a, 7).is_valid(cg)
    greedy = associate_greedy(cg, a, s).max_slots(1)
    rand = np.mean([associate_random(cg, a, seed).max_slots(1) for seed in range(100)])
    assert rand >= greedy


def test_reuse_delivery_time_example():
    cg = build_collision_graph(fixtures.example_layout())
    a, s = fixtures.example_assignment(), fixtures.example_scheme()
    col = color_exact(build_helper_conflict_graph(cg))
    assoc = associate_greedy(cg, a, s)
    # access bound: 3 colors, 3 slots of F/3
    assert reuse_delivery_time(col, assoc, s, c_front=10.0, c_access=1.0, F=1.0) == pytest.approx(3.0)
    assert reuse_delivery_time(col, assoc, s, 10.0, 2.0, F=1.0) == pytest.approx(1.5)
    assert reuse_delivery_time(col, assoc, s, 0.1, 1.0, F=1.0) == pytest.approx(10.0)


def test_reuse_single_helper_reduction():
    L, tp = 4, 1
    cg = CollisionGraph((1,), (1, 2, 3, 4), frozenset((1, k) for k in range(1, 5)), frozenset())
    a = CacheAssignment({k: k for k in range(1, 5)}, L)
    s = scheme(L, tp)
    col = color_dsatur(build_helper_conflict_graph(cg))
    assert col.r == 1
    t = reuse_delivery_time(col, associate_greedy(cg, a, s), s, 2.0, 1.0, F=1.0)
    assert t == pytest.approx(max(1 / 2.0, 1 / 1.0) * (L - tp) / (1 + tp))


def test_coloring_and_association_value_objects():
    g = graph(2, [(1, 2)])
    assert not Coloring({1: 1, 2: 1}).is_valid(g)
    assoc = Association({1: 1, 2: None}, {1: 1, 2: 2}, 2)
    assert assoc.helpers() == [1]
    assert assoc.occupancies(1) == [1, 0]
    assert comb(2, 2) == assoc.max_slots(1)
