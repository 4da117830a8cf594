"""Reuse scheme for the collision model: helper coloring, user association and
the resulting worst-case delivery time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
import scipy.sparse as sp

from .lp import MixedBinaryProgram, solve_binary_min
from .model import CacheAssignment, CacheScheme, binom
from .multiround import multiround_slots
from .scenario import CollisionGraph, HelperConflictGraph

MAX_EXACT_COLORING = 30
MAX_EXACT_L = 6
MAX_AMBIGUOUS = 15


class ExactSolveUnavailable(RuntimeError):
    """The exact solver declined (size gate) or gave up (node budget)."""


# --------------------------------------------------------------------------
# Coloring
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Coloring:
    color_of: dict[int, int]

    @property
    def r(self) -> int:
        return len(set(self.color_of.values()))

    def is_valid(self, g: HelperConflictGraph) -> bool:
        return all(self.color_of[i] != self.color_of[j] for i, j in g.edges)


def _canonical(color_of: dict[int, int]) -> dict[int, int]:
    """Relabel colors 1..r in order of first appearance by vertex id."""
    relabel: dict[int, int] = {}
    out = {}
    for v in sorted(color_of):
        c = color_of[v]
        if c not in relabel:
            relabel[c] = len(relabel) + 1
        out[v] = relabel[c]
    return out


def color_dsatur(g: HelperConflictGraph) -> Coloring:
    """DSatur: highest saturation first, then higher degree, then lower id."""
    adj = g.neighbors()
    color: dict[int, int] = {}
    seen: dict[int, set[int]] = {v: set() for v in g.vertices}
    uncolored = set(g.vertices)
    while uncolored:
        v = min(uncolored, key=lambda u: (-len(seen[u]), -len(adj[u]), u))
        c = 1
        while c in seen[v]:
            c += 1
        color[v] = c
        uncolored.discard(v)
        for u in adj[v]:
            seen[u].add(c)
    return Coloring(_canonical(color))


def _components(g: HelperConflictGraph) -> list[list[int]]:
    adj = g.neighbors()
    left = set(g.vertices)
    out = []
    while left:
        stack = [min(left)]
        comp = set(stack)
        while stack:
            for u in adj[stack.pop()]:
                if u not in comp:
                    comp.add(u)
                    stack.append(u)
        left -= comp
        out.append(sorted(comp))
    return out


def _greedy_clique(vertices: list[int], adj) -> int:
    best = 1 if vertices else 0
    for v in vertices:
        clique = [v]
        for u in sorted(adj[v] & set(vertices), key=lambda x: (-len(adj[x]), x)):
            if all(u in adj[w] for w in clique):
                clique.append(u)
        best = max(best, len(clique))
    return best


def _color_component(vertices: list[int], adj, node_limit: int) -> dict[int, int]:
    sub = HelperConflictGraph(tuple(vertices), frozenset(
        (i, j) for i in vertices for j in adj[i] if i < j))
    warm = color_dsatur(sub).color_of
    upper = max(warm.values(), default=0)
    lower = _greedy_clique(vertices, adj)
    if upper <= lower:
        return warm

    n, C = len(vertices), upper
    pos = {v: i for i, v in enumerate(vertices)}
    nv = C + n * C
    yi = lambda c: c                     # noqa: E731
    xi = lambda i, c: C + i * C + c      # noqa: E731
    ub_rows, eq_rows = [], []
    for i in range(n):
        eq_rows.append({xi(i, c): 1.0 for c in range(C)})
    for i, v in enumerate(vertices):
        for u in adj[v]:
            j = pos[u]
            if i < j:
                for c in range(C):
                    ub_rows.append({xi(i, c): 1.0, xi(j, c): 1.0, yi(c): -1.0})
        for c in range(C):
            ub_rows.append({xi(i, c): 1.0, yi(c): -1.0})
    for c in range(C - 1):
        ub_rows.append({yi(c + 1): 1.0, yi(c): -1.0})
    upper_b = np.ones(nv)
    for i in range(n):
        for c in range(i + 1, C):
            upper_b[xi(i, c)] = 0.0

    def mat(rows):
        r, cidx, val = [], [], []
        for k, row in enumerate(rows):
            for j, a in row.items():
                r.append(k)
                cidx.append(j)
                val.append(a)
        return sp.csr_matrix((val, (r, cidx)), shape=(len(rows), nv))

    # upper bounds on binaries become explicit rows
    fixed_zero = [{j: 1.0} for j in np.flatnonzero(upper_b == 0.0)]
    A_ub = mat(ub_rows + fixed_zero)
    b_ub = np.zeros(A_ub.shape[0])
    c_obj = np.zeros(nv)
    c_obj[:C] = 1.0
    prog = MixedBinaryProgram(c_obj, A_ub, b_ub, mat(eq_rows), np.ones(n),
                              np.ones(nv, bool), integral_objective=True)

    inc = np.zeros(nv)
    for v, col in warm.items():
        inc[xi(pos[v], col - 1)] = 1.0
        inc[yi(col - 1)] = 1.0
    res = solve_binary_min(prog, node_limit=node_limit, incumbent=inc, lower_bound=lower)
    if res.status != "optimal":
        raise ExactSolveUnavailable(
            f"coloring search exceeded {node_limit} nodes; use color_dsatur instead")
    return {v: 1 + int(np.argmax(res.x[xi(i, 0): xi(i, 0) + C])) for i, v in enumerate(vertices)}


def color_exact(g: HelperConflictGraph, node_limit: int = 20000) -> Coloring:
    """Minimum coloring via the 0/1 program; components are solved separately."""
    if len(g.vertices) > MAX_EXACT_COLORING:
        raise ExactSolveUnavailable(
            f"exact coloring is limited to {MAX_EXACT_COLORING} helpers "
            f"(got {len(g.vertices)}); use color_dsatur instead")
    adj = g.neighbors()
    color = {}
    for comp in _components(g):
        color.update(_color_component(comp, adj, node_limit))
    return Coloring(_canonical(color))


# --------------------------------------------------------------------------
# Association
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Association:
    helper_of: dict[int, int | None]
    group_of: dict[int, int]
    L: int

    def groups(self, h: int) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {ell: [] for ell in range(1, self.L + 1)}
        for k in sorted(self.helper_of):
            if self.helper_of[k] == h:
                out[self.group_of[k]].append(k)
        return out

    def occupancies(self, h: int) -> list[int]:
        return [len(v) for v in self.groups(h).values()]

    def helpers(self) -> list[int]:
        return sorted({h for h in self.helper_of.values() if h is not None})

    def slots(self, t_prime: int) -> dict[int, int]:
        return {h: multiround_slots(self.occupancies(h), self.L, t_prime) for h in self.helpers()}

    def max_slots(self, t_prime: int) -> int:
        return max(self.slots(t_prime).values(), default=0)

    def is_valid(self, cg: CollisionGraph) -> bool:
        return all(h is None or (h, k) in cg.solid for k, h in self.helper_of.items())


def _occ_slots(counts: dict[int, int], L: int, t_prime: int) -> int:
    return multiround_slots(list(counts.values()), L, t_prime)


def associate_greedy(cg: CollisionGraph, assignment: CacheAssignment, scheme: CacheScheme) -> Association:
    """Single-homed users first; then each multi-homed user, ascending, goes to
    the helper minimizing (resulting max slots, that helper's slots, helper id)."""
    L, tp = scheme.L, scheme.t_prime
    counts: dict[int, dict[int, int]] = {h: {} for h in cg.helpers}
    helper_of: dict[int, int | None] = {}

    def add(h, k):
        g = assignment.group_of[k]
        counts[h][g] = counts[h].get(g, 0) + 1
        helper_of[k] = h

    for k in cg.users:
        if len(cg.solid_of[k]) == 1:
            add(cg.solid_of[k][0], k)
    slots = {h: _occ_slots(counts[h], L, tp) for h in cg.helpers}
    for k in cg.users:
        if len(cg.solid_of[k]) < 2:
            continue
        g = assignment.group_of[k]
        best = None
        for h in cg.solid_of[k]:
            trial = dict(counts[h])
            trial[g] = trial.get(g, 0) + 1
            new = _occ_slots(trial, L, tp)
            others = max((s for h2, s in slots.items() if h2 != h), default=0)
            key = (max(others, new), new, h)
            if best is None or key < best:
                best = key
        h = best[2]
        add(h, k)
        slots[h] = best[1]
    return Association(helper_of, {k: assignment.group_of[k] for k in cg.users}, L)


def associate_random(cg: CollisionGraph, assignment: CacheAssignment, seed) -> Association:
    rng = np.random.default_rng(seed)
    helper_of = {k: int(cg.solid_of[k][rng.integers(len(cg.solid_of[k]))]) for k in cg.users}
    return Association(helper_of, {k: assignment.group_of[k] for k in cg.users}, assignment.L)


def _rank_weights(L: int, tp: int) -> list[int]:
    return [binom(L - r, tp) for r in range(1, L - tp + 1)]


def associate_exact(
    cg: CollisionGraph,
    assignment: CacheAssignment,
    scheme: CacheScheme,
    node_limit: int = 50000,
) -> Association:
    """Minimize the largest per-helper multiround slot count.

    The sorted-occupancy load is written as one linear constraint per
    permutation of the groups; only the sorting one binds.  Raises
    :class:`ExactSolveUnavailable` when the instance is over the size gates or
    the search budget runs out, so callers can fall back to the greedy rule.
    """
    L, tp = scheme.L, scheme.t_prime
    ambiguous = [k for k in cg.users if len(cg.solid_of[k]) > 1]
    if L > MAX_EXACT_L or len(ambiguous) > MAX_AMBIGUOUS:
        raise ExactSolveUnavailable(
            f"exact association needs L <= {MAX_EXACT_L} and <= {MAX_AMBIGUOUS} multi-homed users "
            f"(got L={L}, {len(ambiguous)}); use associate_greedy instead")
    greedy = associate_greedy(cg, assignment, scheme)
    if not ambiguous:
        return greedy

    group = assignment.group_of
    fixed: dict[int, dict[int, int]] = {h: {} for h in cg.helpers}
    for k in cg.users:
        if len(cg.solid_of[k]) == 1:
            h = cg.solid_of[k][0]
            fixed[h][group[k]] = fixed[h].get(group[k], 0) + 1
    lower = max((_occ_slots(c, L, tp) for c in fixed.values()), default=0)

    x_idx = {}
    for k in ambiguous:
        for h in cg.solid_of[k]:
            x_idx[(h, k)] = len(x_idx)
    hs = sorted({h for h, _ in x_idx})
    a_idx = {(h, ell): len(x_idx) + i * L + (ell - 1) for i, h in enumerate(hs) for ell in range(1, L + 1)}
    alpha = len(x_idx) + len(a_idx)
    nv = alpha + 1

    ub_rows, b_ub, eq_rows = [], [], []
    for h in hs:
        for ell in range(1, L + 1):
            row = {a_idx[(h, ell)]: -1.0}
            for k in ambiguous:
                if group[k] == ell and (h, k) in x_idx:
                    row[x_idx[(h, k)]] = 1.0
            ub_rows.append(row)
            b_ub.append(-float(fixed[h].get(ell, 0)))
    w = _rank_weights(L, tp)
    prefixes = sorted({p[: L - tp] for p in permutations(range(1, L + 1))})
    for h in hs:
        for p in prefixes:
            row = {a_idx[(h, ell)]: float(wi) for ell, wi in zip(p, w)}
            row[alpha] = -1.0
            ub_rows.append(row)
            b_ub.append(0.0)
    for k in ambiguous:
        eq_rows.append({x_idx[(h, k)]: 1.0 for h in cg.solid_of[k]})

    def mat(rows):
        r, c, v = [], [], []
        for i, row in enumerate(rows):
            for j, a in row.items():
                r.append(i)
                c.append(j)
                v.append(a)
        return sp.csr_matrix((v, (r, c)), shape=(len(rows), nv))

    cost = np.zeros(nv)
    cost[alpha] = 1.0
    binary = np.zeros(nv, bool)
    binary[: len(x_idx)] = True
    upper = np.full(nv, math.inf)
    prog = MixedBinaryProgram(cost, mat(ub_rows), np.array(b_ub), mat(eq_rows),
                              np.ones(len(eq_rows)), binary, upper, integral_objective=True)

    inc = np.zeros(nv)
    for (h, k), j in x_idx.items():
        inc[j] = 1.0 if greedy.helper_of[k] == h else 0.0
    for h in hs:
        occ = greedy.groups(h)
        for ell in range(1, L + 1):
            inc[a_idx[(h, ell)]] = len(occ[ell])
    inc[alpha] = greedy.max_slots(tp)
    res = solve_binary_min(prog, node_limit=node_limit, incumbent=inc, lower_bound=lower)
    if res.status != "optimal":
        raise ExactSolveUnavailable(f"association search exceeded {node_limit} nodes")

    helper_of = dict(greedy.helper_of)
    for (h, k), j in x_idx.items():
        if res.x[j] > 0.5:
            helper_of[k] = h
    return Association(helper_of, greedy.group_of, L)


def reuse_delivery_time(
    coloring: Coloring,
    assoc: Association,
    scheme: CacheScheme,
    c_front: float,
    c_access: float,
    F: float = 1.0,
) -> float:
    """max{F/C_front, r F/C_access} times the largest per-helper multiround load."""
    r_h = assoc.max_slots(scheme.t_prime) / scheme.subpacketization
    return max(F / c_front, coloring.r * F / c_access) * r_h
