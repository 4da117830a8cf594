"""Seeded Monte-Carlo runs of every scheme on shared layouts, plus CSV output."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import numpy as np

from .avalanche import avalanche_run
from .collision import (
    ExactSolveUnavailable,
    associate_exact,
    associate_greedy,
    associate_random,
    color_dsatur,
    color_exact,
    reuse_delivery_time,
)
from .model import CacheScheme, assign_caches, replication_parameter
from .scenario import (
    build_collision_graph,
    build_helper_conflict_graph,
    build_topological_graph,
    covered_users,
    generate_layout,
)
from .topo import RoutingInfeasible, solve_centralized_routing, solve_multiround_routing, solve_new_decentralized_routing

log = logging.getLogger(__name__)

TOPOLOGICAL_SCHEMES = ("central", "multiround", "new-lp")
COLLISION_SCHEMES = ("reuse-exact", "reuse-dsatur+greedy", "reuse-random", "avalanche")
SWEEP_PARAMS = ("mu", "L", "c_ratio")
CSV_COLUMNS = ("scheme", "sweep_param", "sweep_value", "seed", "t_seconds", "t_normalized", "flag")


def parse_fraction(x):
    """Exact Fraction for rational-looking inputs like 0.2 or "1/5"."""
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**6)
    return Fraction(x)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "topological"
    schemes: tuple[str, ...] = ("multiround", "new-lp")
    sweep_param: str = "L"
    sweep_values: tuple = (5, 10)
    instances: int = 10
    base_seed: int = 0
    L: int = 5
    mu: Fraction = Fraction(1, 5)
    lambda_h: float = 7.0
    lambda_u: float = 140.0
    radius_m: float = 1000.0
    a_sig: float = 220.0
    a_cell: float = 200.0
    a_interf: float = 240.0
    c_front: float = 1.0
    c_access: float = 1.0
    F: float = 1.0
    lp_method: str = "direct"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        object.__setattr__(self, "mu", parse_fraction(self.mu))
        allowed = TOPOLOGICAL_SCHEMES if self.model == "topological" else COLLISION_SCHEMES
        if self.model not in ("topological", "collision"):
            raise ValueError(f"model must be 'topological' or 'collision', got {self.model!r}")
        bad = [s for s in self.schemes if s not in allowed]
        if bad:
            raise ValueError(f"schemes {bad} do not belong to the {self.model} model (allowed: {allowed})")
        if self.sweep_param not in SWEEP_PARAMS:
            raise ValueError(f"sweep_param must be one of {SWEEP_PARAMS}")
        if not self.sweep_values:
            raise ValueError("sweep_values is empty")
        if self.instances < 1:
            raise ValueError("instances must be >= 1")
        for name in ("lambda_h", "lambda_u", "radius_m", "a_sig", "a_cell", "a_interf", "c_front", "c_access", "F"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lp_method not in ("direct", "bisection"):
            raise ValueError("lp_method must be 'direct' or 'bisection'")
        for v in self.sweep_values:
            L = int(v) if self.sweep_param == "L" else self.L
            mu = parse_fraction(v) if self.sweep_param == "mu" else self.mu
            if L < 1:
                raise ValueError("L must be >= 1")
            replication_parameter(L, mu)

    def point(self, value) -> "ExperimentConfig":
        """The config with the sweep parameter pinned to ``value``."""
        if self.sweep_param == "L":
            return replace(self, L=int(value), sweep_values=(value,))
        if self.sweep_param == "mu":
            return replace(self, mu=parse_fraction(value), sweep_values=(value,))
        return replace(self, c_access=float(value) * self.c_front, sweep_values=(value,))

    def scheme_params(self) -> tuple[int, int]:
        if self.L < 1:
            raise ValueError("L must be >= 1")
        return self.L, replication_parameter(self.L, self.mu)

    def cache_scheme(self) -> CacheScheme:
        L, tp = self.scheme_params()
        return CacheScheme(L, tp, tuple(combinations(range(1, L + 1), tp)))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))


@dataclass
class ResultRecord:
    scheme: str
    sweep_param: str
    sweep_value: object
    seed: int
    t_seconds: float
    t_normalized: float
    flag: str = ""
    diagnostics: dict = field(default_factory=dict)

    def row(self) -> list:
        return [self.scheme, self.sweep_param, self.sweep_value, self.seed,
                repr(float(self.t_seconds)), repr(float(self.t_normalized)), self.flag]


def _topological(cfg: ExperimentConfig, layout, seed) -> list[tuple[str, float, str, dict]]:
    graph = build_topological_graph(layout)
    scheme = cfg.cache_scheme()
    assignment = assign_caches(layout.K, scheme.L, seed)
    out = []
    for name in cfg.schemes:
        try:
            if name == "central":
                t = len(graph.users) * cfg.mu
                if t.denominator != 1:
                    out.append((name, math.nan, "t-not-integer", {}))
                    continue
                sol = solve_centralized_routing(graph, int(t), cfg.F, cfg.lp_method)
            elif name == "multiround":
                sol = solve_multiround_routing(graph, assignment, scheme, cfg.F, cfg.lp_method)
            else:
                sol = solve_new_decentralized_routing(graph, assignment, scheme, cfg.F, cfg.lp_method)
        except (ValueError, RoutingInfeasible) as exc:
            log.info("seed %d scheme %s: %s", seed, name, exc)
            out.append((name, math.nan, "infeasible", {"error": str(exc)}))
            continue
        out.append((name, sol.t_total, "", {"alpha": sol.alpha, "lp_iterations": sol.iterations,
                                             "users": len(graph.users), "dropped": len(graph.dropped)}))
    return out


def _collision(cfg: ExperimentConfig, layout, seed) -> list[tuple[str, float, str, dict]]:
    layout = layout.with_users(covered_users(layout, layout.a_cell))
    cg = build_collision_graph(layout)
    scheme = cfg.cache_scheme()
    assignment = assign_caches(layout.K, scheme.L, seed)
    conflicts = build_helper_conflict_graph(cg)
    dsatur = color_dsatur(conflicts)
    out = []
    for name in cfg.schemes:
        flag = ""
        if name == "avalanche":
            res = avalanche_run(cg, assignment, scheme, cfg.c_front, cfg.c_access, cfg.F)
            out.append((name, res.seconds, "", {"slots": res.slots, "iterations": res.iterations}))
            continue
        if name == "reuse-exact":
            try:
                coloring = color_exact(conflicts)
                assoc = associate_exact(cg, assignment, scheme)
            except ExactSolveUnavailable as exc:
                log.info("seed %d: exact reuse unavailable (%s); using DSatur + greedy", seed, exc)
                coloring, assoc, flag = dsatur, associate_greedy(cg, assignment, scheme), "fallback-greedy"
        elif name == "reuse-dsatur+greedy":
            coloring, assoc = dsatur, associate_greedy(cg, assignment, scheme)
        else:
            coloring, assoc = dsatur, associate_random(cg, assignment, seed)
        t = reuse_delivery_time(coloring, assoc, scheme, cfg.c_front, cfg.c_access, cfg.F)
        out.append((name, t, flag, {"r": coloring.r, "max_slots": assoc.max_slots(scheme.t_prime)}))
    return out


def _run_instance(args) -> list[ResultRecord]:
    cfg, value, index = args
    point = cfg.point(value)
    seed = cfg.base_seed + index
    layout = generate_layout(seed, point.lambda_h, point.lambda_u, point.radius_m, point.a_sig,
                             point.a_cell, point.a_interf, point.c_front, point.c_access)
    run = _topological if cfg.model == "topological" else _collision
    if layout.H == 0 or layout.K == 0:
        rows = [(s, math.nan, "empty-layout", {}) for s in cfg.schemes]
    else:
        rows = run(point, layout, seed)
    return [
        ResultRecord(name, cfg.sweep_param, value, seed, t, t * point.c_front / point.F, flag, diag)
        for name, t, flag, diag in rows
    ]


def run_experiment(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Every scheme on every (sweep value, instance); seeds are base_seed + index."""
    jobs = [(cfg, v, i) for v in cfg.sweep_values for i in range(cfg.instances)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_run_instance, jobs))
    else:
        chunks = [_run_instance(j) for j in jobs]
    records = [r for chunk in chunks for r in chunk]
    order = {s: i for i, s in enumerate(cfg.schemes)}
    records.sort(key=lambda r: (order[r.scheme], cfg.sweep_values.index(r.sweep_value), r.seed))
    return records


@dataclass
class SummaryRow:
    scheme: str
    sweep_value: object
    mean: float
    stderr: float
    count: int
    excluded: int


def summarize(records: list[ResultRecord]) -> list[SummaryRow]:
    """Mean and standard error per (scheme, sweep value); flagged rows are excluded and counted."""
    cells: dict[tuple, list[ResultRecord]] = {}
    for r in records:
        cells.setdefault((r.scheme, r.sweep_value), []).append(r)
    out = []
    for (scheme, value), rows in cells.items():
        vals = np.array([r.t_seconds for r in rows if not r.flag], float)
        n = len(vals)
        mean = float(vals.mean()) if n else math.nan
        se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        out.append(SummaryRow(scheme, value, mean, se, n, len(rows) - n))
    return out


def records_to_csv(records: list[ResultRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def summary_to_csv(rows: list[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scheme", "sweep_value", "mean", "stderr", "count", "excluded"))
    for s in rows:
        w.writerow((s.scheme, s.sweep_value, repr(s.mean), repr(s.stderr), s.count, s.excluded))
    return buf.getvalue()


def read_records(path) -> list[ResultRecord]:
    rows = []
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            rows.append(ResultRecord(d["scheme"], d["sweep_param"], d["sweep_value"], int(d["seed"]),
                                     float(d["t_seconds"]), float(d["t_normalized"]), d["flag"]))
    return rows


def write_text(path, text: str) -> None:
    Path(path).write_text(text)


def config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["mu"] = str(cfg.mu)
    return d
