"""Routing of coded multicast messages over the topological two-hop network.

Three schemes share one LP skeleton:

* centralized MAN routing over all (t+1)-subsets of users,
* multiround delivery, one routing LP per column of the global delivery array,
* the per-user decentralized routing where each helper XORs the concatenated
  segments of its own users group by group.

Every problem is min alpha subject to per-helper fronthaul load <= alpha and
per-link access load <= (C_{h->k}/C_front) alpha.  ``method="bisection"``
fixes alpha and bisects on LP feasibility; ``method="direct"`` substitutes
c_{h,k} = alpha C_{h->k}/C_front, which makes alpha an ordinary LP variable.
Both return the same optimum.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Hashable, Sequence

from .lp import BisectionConfig, LinearProgram, bisect_min_alpha, solve_lp
from .model import CacheAssignment, CacheScheme, binom
from .multiround import build_delivery_array
from .scenario import TopologicalGraph

MAX_CENTRAL_USERS = 12
METHODS = ("bisection", "direct")


class RoutingInfeasible(ValueError):
    pass


@dataclass
class RoutingSolution:
    scheme: str
    y: dict[tuple, float]
    c_split: dict[tuple[int, int], float]
    alpha: float
    t_front: float
    t_access: float
    iterations: int = 0
    rounds: list["RoutingSolution"] = field(default_factory=list)
    t_sum: float | None = None

    @property
    def t_total(self) -> float:
        if self.t_sum is not None:
            return self.t_sum
        return max(self.t_front, self.t_access)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "alpha": self.alpha,
            "t_front": self.t_front,
            "t_access": self.t_access,
            "t_total": self.t_total,
            "rounds": [r.to_dict() for r in self.rounds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# --------------------------------------------------------------------------
# Shared LP skeleton
# --------------------------------------------------------------------------


@dataclass
class _Skeleton:
    """y variables with per-helper fronthaul terms, per-link access terms and
    coverage rows (rhs 1).  ``front`` may list auxiliary variables as well."""

    y_vars: list[Hashable]
    front: dict[int, list[Hashable]]
    access: dict[tuple[int, int], list[Hashable]]
    coverage: list[tuple[list[Hashable], str]]
    aux_rows: list[tuple[dict[Hashable, float], str, float]] = field(default_factory=list)
    aux_vars: list[Hashable] = field(default_factory=list)

    def __post_init__(self):
        aux = set(self.aux_vars)
        self._name = lambda v: ("aux", v) if v in aux else ("y", v)

    def _base(self, with_alpha: bool) -> LinearProgram:
        lp = LinearProgram()
        for v in self.y_vars:
            lp.add_var(("y", v))
        for v in self.aux_vars:
            lp.add_var(("aux", v))
        for hk in self.access:
            lp.add_var(("c",) + hk)
        if with_alpha:
            lp.add_var("alpha")
        for vars_, sense in self.coverage:
            lp.add_constraint({self._name(v): 1.0 for v in vars_}, sense, 1.0)
        for coeffs, sense, rhs in self.aux_rows:
            lp.add_constraint({self._name(v): c for v, c in coeffs.items()}, sense, rhs)
        return lp

    def _helper_links(self):
        out: dict[int, list] = {}
        for hk in self.access:
            out.setdefault(hk[0], []).append(("c",) + hk)
        return out

    def direct(self, ratio: float) -> LinearProgram:
        """alpha as a variable; c[h,k] stands for alpha C_{h->k}/C_front."""
        lp = self._base(True)
        for h, vars_ in self.front.items():
            row = {self._name(v): 1.0 for v in vars_}
            row["alpha"] = -1.0
            lp.add_constraint(row, "<=", 0.0)
        for hk, vars_ in self.access.items():
            row = {self._name(v): 1.0 for v in vars_}
            row[("c",) + hk] = -1.0
            lp.add_constraint(row, "<=", 0.0)
        for h, cs in self._helper_links().items():
            row = {c: 1.0 for c in cs}
            row["alpha"] = -ratio
            lp.add_constraint(row, "<=", 0.0)
        lp.set_objective({"alpha": 1.0})
        return lp

    def fixed(self, alpha: float, ratio: float) -> LinearProgram:
        """Feasibility at fixed alpha; c[h,k] stands for C_{h->k}/C_front."""
        lp = self._base(False)
        for h, vars_ in self.front.items():
            lp.add_constraint({self._name(v): 1.0 for v in vars_}, "<=", alpha)
        for hk, vars_ in self.access.items():
            row = {self._name(v): 1.0 for v in vars_}
            row[("c",) + hk] = -alpha
            lp.add_constraint(row, "<=", 0.0)
        for h, cs in self._helper_links().items():
            lp.add_constraint({c: 1.0 for c in cs}, "<=", ratio)
        return lp


def _solve(sk: _Skeleton, ratio: float, method: str, alpha_high: float, cfg: BisectionConfig | None):
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if not sk.y_vars:
        return 0.0, {}, 0
    if method == "direct":
        lp = sk.direct(ratio)
        res = solve_lp(lp)
        if not res.feasible:
            raise RoutingInfeasible(res.status)
        alpha = res.value(lp, "alpha")
        iters = 1
    else:
        # the caller's tolerance and iteration cap are kept; the bracket is ours
        base = cfg or BisectionConfig()
        cfg = BisectionConfig(0.0, alpha_high, base.rel_tolerance, base.max_iters)
        out = bisect_min_alpha(lambda a: sk.fixed(a, ratio), cfg)
        lp = sk.fixed(out.alpha, ratio)
        res = out.solution
        alpha = out.alpha
        iters = out.iterations
    y = {}
    for v in sk.y_vars:
        val = float(res.x[lp.index[("y", v)]])
        if val > 0:
            y[v] = val
    return alpha, y, iters


def _proportional_split(access_load: dict[tuple[int, int], float], c_access: float):
    """Optimal split of each helper's access capacity for fixed loads."""
    per_helper: dict[int, float] = {}
    for (h, _), v in access_load.items():
        per_helper[h] = per_helper.get(h, 0.0) + v
    split = {
        hk: (c_access * v / per_helper[hk[0]] if per_helper[hk[0]] > 0 else 0.0)
        for hk, v in access_load.items()
    }
    return split, per_helper


def _finish(scheme, y, alpha, iters, front_load, access_load, graph, subpack, F) -> RoutingSolution:
    split, per_helper = _proportional_split(access_load, graph.c_access)
    t_front = max(front_load.values(), default=0.0) * F / (graph.c_front * subpack)
    t_access = max(per_helper.values(), default=0.0) * F / (graph.c_access * subpack)
    return RoutingSolution(scheme, y, split, alpha, t_front, t_access, iters)


def _check_connected(graph: TopologicalGraph, users) -> None:
    lonely = [k for k in users if not graph.helpers_of.get(k)]
    if lonely:
        raise RoutingInfeasible(f"users without any helper: {lonely}")


# --------------------------------------------------------------------------
# MAN-style message routing (centralized and per round)
# --------------------------------------------------------------------------


def _message_skeleton(messages, helpers_of) -> _Skeleton:
    """messages: list of (key, recipients); y[(key, h)] for helpers touching a recipient."""
    y_vars, front, access, coverage = [], {}, {}, []
    for key, recips in messages:
        hs = sorted({h for k in recips for h in helpers_of[k]})
        for h in hs:
            y_vars.append((key, h))
            front.setdefault(h, []).append((key, h))
            for k in recips:
                if h in helpers_of[k]:
                    access.setdefault((h, k), []).append((key, h))
        for k in recips:
            coverage.append(([(key, h) for h in helpers_of[k]], ">="))
    return _Skeleton(y_vars, front, access, coverage)


def _message_loads(messages, helpers_of, y):
    front, access = {}, {}
    for key, recips in messages:
        for k in recips:
            for h in helpers_of[k]:
                access[(h, k)] = access.get((h, k), 0.0) + y.get((key, h), 0.0)
    for (key, h), v in y.items():
        front[h] = front.get(h, 0.0) + v
    return front, access


def _message_alpha_high(messages, helpers_of, users_of, ratio) -> float:
    # every message copied on every helper touching a recipient, equal split
    front = {}
    access = {}
    for key, recips in messages:
        hs = {h for k in recips for h in helpers_of[k]}
        for h in hs:
            front[h] = front.get(h, 0) + 1
        for k in recips:
            for h in helpers_of[k]:
                access[(h, k)] = access.get((h, k), 0) + 1
    deg = {h: sum(1 for hk in access if hk[0] == h) for h in front}
    a = max(front.values(), default=0)
    for (h, k), n in access.items():
        a = max(a, n * deg[h] / ratio)
    return max(a, 1e-12) * (1 + 1e-6)


def _route_messages(scheme, messages, graph, subpack, F, method, cfg) -> RoutingSolution:
    ratio = graph.c_access / graph.c_front
    sk = _message_skeleton(messages, graph.helpers_of)
    high = _message_alpha_high(messages, graph.helpers_of, graph.users_of, ratio)
    alpha, y, iters = _solve(sk, ratio, method, high, cfg)
    front, access = _message_loads(messages, graph.helpers_of, y)
    return _finish(scheme, y, alpha, iters, front, access, graph, subpack, F)


def solve_centralized_routing(
    graph: TopologicalGraph,
    t: int,
    F: float = 1.0,
    method: str = "bisection",
    cfg: BisectionConfig | None = None,
) -> RoutingSolution:
    """MAN prefetching with t = KM/N and optimized routing of every X_S."""
    if isinstance(t, float) and not t.is_integer():
        raise ValueError(f"t={t} is not an integer")
    t = int(t)
    users = graph.users
    K = len(users)
    if K > MAX_CENTRAL_USERS:
        raise ValueError(
            f"centralized routing is limited to K <= {MAX_CENTRAL_USERS} users (got {K}); "
            "the message count C(K, t+1) explodes beyond that"
        )
    if not 0 <= t <= K:
        raise ValueError(f"t={t} outside [0, {K}]")
    _check_connected(graph, users)
    messages = [(S, S) for S in combinations(users, t + 1)] if t < K else []
    return _route_messages("central", messages, graph, binom(K, t), F, method, cfg)


def _round_messages(array, tp: int):
    """Per column: the subsets S meeting the column, with recipients S-cap-R_j."""
    for j in range(array.n_cols):
        col = array.column(j)  # group -> user
        messages = []
        for S in combinations(range(1, array.L + 1), tp + 1):
            recips = tuple(col[ell] for ell in S if ell in col)
            if recips:
                messages.append((S, recips))
        yield messages


def solve_multiround_routing(
    graph: TopologicalGraph,
    assignment: CacheAssignment,
    scheme: CacheScheme,
    F: float = 1.0,
    method: str = "bisection",
    cfg: BisectionConfig | None = None,
) -> RoutingSolution:
    """One routing LP per column of the global delivery array; rounds run back to back."""
    users = graph.users
    _check_connected(graph, users)
    part = assignment.restricted(users).partition
    array = build_delivery_array(part, scheme.L)
    rounds = []
    for messages in _round_messages(array, scheme.t_prime):
        rounds.append(_route_messages("multiround-round", messages, graph, scheme.subpacketization, F, method, cfg))
    total = sum(r.t_total for r in rounds)
    return RoutingSolution(
        "multiround", {}, {},
        alpha=sum(r.alpha for r in rounds),
        t_front=sum(r.t_front for r in rounds),
        t_access=sum(r.t_access for r in rounds),
        iterations=sum(r.iterations for r in rounds),
        rounds=rounds,
        t_sum=total,
    )


# --------------------------------------------------------------------------
# Per-user decentralized routing
# --------------------------------------------------------------------------


def _new_scheme_skeleton(graph: TopologicalGraph, assignment: CacheAssignment, scheme: CacheScheme):
    users = graph.users
    L, tp = scheme.L, scheme.t_prime
    group = {k: assignment.group_of[k] for k in users}
    subsets = list(combinations(range(1, L + 1), tp + 1))

    y_vars, access, coverage = [], {}, []
    members: dict[tuple[int, tuple], dict[int, list]] = {}
    for k in users:
        for S in subsets:
            if group[k] not in S:
                continue
            vs = []
            for h in graph.helpers_of[k]:
                v = (k, S, h)
                y_vars.append(v)
                vs.append(v)
                access.setdefault((h, k), []).append(v)
                members.setdefault((h, S), {}).setdefault(group[k], []).append(v)
            coverage.append((vs, "=="))

    aux_vars, aux_rows, front = [], [], {}
    for (h, S), by_group in members.items():
        m = ("m", h, S)
        aux_vars.append(m)
        front.setdefault(h, []).append(m)
        for vs in by_group.values():
            row = {v: 1.0 for v in vs}
            row[m] = -1.0
            aux_rows.append((row, "<=", 0.0))
    sk = _Skeleton(y_vars, front, access, coverage, aux_rows, aux_vars)

    ratio = graph.c_access / graph.c_front
    # every user routes through its first helper; each helper carries at most
    # all C(L, t'+1) messages at full subfile length per group member
    high = 1e-12
    for h, us in graph.users_of.items():
        if not us:
            continue
        cnt = {}
        for k in us:
            cnt[group[k]] = cnt.get(group[k], 0) + 1
        biggest = max(cnt.values())
        high = max(high, len(subsets) * biggest, binom(L - 1, tp) * len(us) / ratio)
    return sk, members, access, high * (1 + 1e-6)


def solve_new_decentralized_routing(
    graph: TopologicalGraph,
    assignment: CacheAssignment,
    scheme: CacheScheme,
    F: float = 1.0,
    method: str = "bisection",
    cfg: BisectionConfig | None = None,
) -> RoutingSolution:
    """Route each user's missing subfiles in segments over its own helpers.

    y[(k, S, h)] is the normalized length of W_{d_k, S minus ell_k} sent via h.
    The fronthaul load of h for message S is the longest group concatenation,
    linearized with one auxiliary variable m[(h, S)] per helper and subset.
    """
    _check_connected(graph, graph.users)
    sk, members, access, high = _new_scheme_skeleton(graph, assignment, scheme)
    ratio = graph.c_access / graph.c_front
    alpha, y, iters = _solve(sk, ratio, method, high, cfg)

    front_load: dict[int, float] = {}
    for (h, S), by_group in members.items():
        worst = max(sum(y.get(v, 0.0) for v in vs) for vs in by_group.values())
        front_load[h] = front_load.get(h, 0.0) + worst
    access_load = {hk: sum(y.get(v, 0.0) for v in vs) for hk, vs in access.items()}
    return _finish("new-lp", y, alpha, iters, front_load, access_load, graph, scheme.subpacketization, F)


def _skeletons(kind, graph, t=None, assignment=None, scheme=None) -> list[_Skeleton]:
    if kind == "central":
        users = graph.users
        msgs = [(S, S) for S in combinations(users, t + 1)] if t < len(users) else []
        return [_message_skeleton(msgs, graph.helpers_of)]
    if kind == "multiround":
        array = build_delivery_array(assignment.restricted(graph.users).partition, scheme.L)
        return [_message_skeleton(m, graph.helpers_of) for m in _round_messages(array, scheme.t_prime)]
    if kind == "new-lp":
        return [_new_scheme_skeleton(graph, assignment, scheme)[0]]
    raise ValueError(f"unknown routing scheme {kind!r}")


def direct_programs(
    kind: str,
    graph: TopologicalGraph,
    t: int | None = None,
    assignment: CacheAssignment | None = None,
    scheme: CacheScheme | None = None,
) -> list[LinearProgram]:
    """The single-LP forms that ``method="direct"`` solves, one per round for multiround."""
    ratio = graph.c_access / graph.c_front
    return [sk.direct(ratio) for sk in _skeletons(kind, graph, t, assignment, scheme)]


def feasibility_families(
    kind: str,
    graph: TopologicalGraph,
    t: int | None = None,
    assignment: CacheAssignment | None = None,
    scheme: CacheScheme | None = None,
) -> list[Callable[[float], LinearProgram]]:
    """alpha -> fixed-alpha feasibility LP, as bisected by ``method="bisection"``."""
    ratio = graph.c_access / graph.c_front
    return [(lambda a, sk=sk: sk.fixed(a, ratio)) for sk in _skeletons(kind, graph, t, assignment, scheme)]


def single_helper_graph(users: Sequence[int], c_front: float = 1.0, c_access: float | None = None) -> TopologicalGraph:
    """One helper serving every user (the shared-link network)."""
    users = list(users)
    if c_access is None:
        c_access = len(users) * c_front
    return TopologicalGraph.from_edges([(1, k) for k in users], c_front, c_access)


def alpha_to_time(alpha: float, subpack: int, c_front: float, F: float = 1.0) -> float:
    return alpha * F / (c_front * subpack)


def check_solution(sol: RoutingSolution, graph: TopologicalGraph, tol: float = 1e-9) -> list[str]:
    """Constraint audit of a returned split: per-helper capacity sums."""
    problems = []
    sums: dict[int, float] = {}
    for (h, _), c in sol.c_split.items():
        sums[h] = sums.get(h, 0.0) + c
    for h, s in sums.items():
        if s > graph.c_access * (1 + tol) + tol:
            problems.append(f"helper {h} access split {s} exceeds C_access={graph.c_access}")
    if not math.isfinite(sol.t_total):
        problems.append("non-finite delivery time")
    return problems
