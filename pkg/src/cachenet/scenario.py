"""Spatial layouts and the access graphs derived from them.

Distances are in meters, densities in points per km^2.  Helper and user ids
are 1-based positions in the layout arrays.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

COORD_DIGITS = 6


@dataclass
class Layout:
    helpers: np.ndarray
    users: np.ndarray
    region_radius: float
    a_sig: float = 220.0
    a_cell: float = 200.0
    a_interf: float = 240.0
    c_front: float = 1.0
    c_access: float = 1.0

    def __post_init__(self):
        self.helpers = np.asarray(self.helpers, float).reshape(-1, 2)
        self.users = np.asarray(self.users, float).reshape(-1, 2)
        if not self.a_cell <= self.a_sig <= self.a_interf:
            raise ValueError(
                f"need a_cell <= a_sig <= a_interf, got {self.a_cell}, {self.a_sig}, {self.a_interf}")
        for name, pts in (("helper", self.helpers), ("user", self.users)):
            far = np.flatnonzero(np.hypot(pts[:, 0], pts[:, 1]) > self.region_radius + 1e-6)
            if far.size:
                raise ValueError(f"{name}s {list(far + 1)} lie outside the region radius {self.region_radius}")

    @property
    def H(self) -> int:
        return len(self.helpers)

    @property
    def K(self) -> int:
        return len(self.users)

    def distances(self) -> np.ndarray:
        """(H, K) helper-to-user distance matrix."""
        diff = self.helpers[:, None, :] - self.users[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def with_users(self, keep) -> "Layout":
        idx = np.asarray(sorted(keep), int) - 1
        return Layout(self.helpers, self.users[idx], self.region_radius, self.a_sig,
                      self.a_cell, self.a_interf, self.c_front, self.c_access)

    def to_json(self) -> str:
        def pts(a):
            return "[" + ", ".join(f"[{x:.{COORD_DIGITS}f}, {y:.{COORD_DIGITS}f}]" for x, y in a) + "]"

        head = {
            "region_radius_m": self.region_radius,
            "a_sig_m": self.a_sig,
            "a_cell_m": self.a_cell,
            "a_interf_m": self.a_interf,
            "c_front_bps": self.c_front,
            "c_access_bps": self.c_access,
        }
        lines = [f'  "{k}": {json.dumps(v)}' for k, v in head.items()]
        lines.append(f'  "helpers": {pts(self.helpers)}')
        lines.append(f'  "users": {pts(self.users)}')
        return "{\n" + ",\n".join(lines) + "\n}\n"

    @classmethod
    def from_json(cls, text: str) -> "Layout":
        doc = json.loads(text)
        return cls(
            helpers=np.array(doc["helpers"], float).reshape(-1, 2),
            users=np.array(doc["users"], float).reshape(-1, 2),
            region_radius=doc["region_radius_m"],
            a_sig=doc["a_sig_m"],
            a_cell=doc["a_cell_m"],
            a_interf=doc["a_interf_m"],
            c_front=doc["c_front_bps"],
            c_access=doc["c_access_bps"],
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Layout":
        return cls.from_json(Path(path).read_text())


def sample_ppp(density_per_km2: float, radius_m: float, rng) -> np.ndarray:
    """Homogeneous Poisson point process on a disk centred at the origin."""
    if density_per_km2 < 0:
        raise ValueError("density must be non-negative")
    rng = np.random.default_rng(rng)
    mean = density_per_km2 * np.pi * (radius_m / 1000.0) ** 2
    n = rng.poisson(mean)
    r = radius_m * np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    return np.round(pts, COORD_DIGITS)


def generate_layout(
    seed,
    lambda_h: float = 7.0,
    lambda_u: float = 140.0,
    radius_m: float = 1000.0,
    a_sig: float = 220.0,
    a_cell: float = 200.0,
    a_interf: float = 240.0,
    c_front: float = 1.0,
    c_access: float = 1.0,
) -> Layout:
    helper_ss, user_ss = np.random.SeedSequence(seed).spawn(2)
    return Layout(
        sample_ppp(lambda_h, radius_m, np.random.default_rng(helper_ss)),
        sample_ppp(lambda_u, radius_m, np.random.default_rng(user_ss)),
        radius_m, a_sig, a_cell, a_interf, c_front, c_access,
    )


def covered_users(layout: Layout, radius: float) -> list[int]:
    """Users within ``radius`` of at least one helper."""
    if layout.H == 0:
        return []
    d = layout.distances()
    return [k + 1 for k in np.flatnonzero((d <= radius).any(axis=0))]


@dataclass
class TopologicalGraph:
    users_of: dict[int, tuple[int, ...]]
    helpers_of: dict[int, tuple[int, ...]]
    c_front: float
    c_access: float
    dropped: tuple[int, ...] = ()

    @property
    def helpers(self) -> list[int]:
        return sorted(self.users_of)

    @property
    def users(self) -> list[int]:
        return sorted(self.helpers_of)

    @classmethod
    def from_edges(cls, edges, c_front=1.0, c_access=1.0, helpers=None) -> "TopologicalGraph":
        users_of: dict[int, list[int]] = {h: [] for h in (helpers or [])}
        helpers_of: dict[int, list[int]] = {}
        for h, k in sorted(set(edges)):
            users_of.setdefault(h, []).append(k)
            helpers_of.setdefault(k, []).append(h)
        return cls(
            {h: tuple(sorted(v)) for h, v in users_of.items()},
            {k: tuple(sorted(v)) for k, v in helpers_of.items()},
            c_front, c_access,
        )


def build_topological_graph(layout: Layout) -> TopologicalGraph:
    d = layout.distances() if layout.H else np.zeros((0, layout.K))
    adj = d <= layout.a_sig
    users_of = {h + 1: tuple(int(k) + 1 for k in np.flatnonzero(adj[h])) for h in range(layout.H)}
    helpers_of = {}
    dropped = []
    for k in range(layout.K):
        hs = tuple(int(h) + 1 for h in np.flatnonzero(adj[:, k]))
        if hs:
            helpers_of[k + 1] = hs
        else:
            dropped.append(k + 1)
    if dropped:
        log.warning("dropping %d user(s) outside a_sig of every helper", len(dropped))
    return TopologicalGraph(users_of, helpers_of, layout.c_front, layout.c_access, tuple(dropped))


class InfeasibleLayout(ValueError):
    pass


@dataclass
class CollisionGraph:
    helpers: tuple[int, ...]
    users: tuple[int, ...]
    solid: frozenset[tuple[int, int]]
    dashed: frozenset[tuple[int, int]]
    c_front: float = 1.0
    c_access: float = 1.0
    solid_of: dict[int, tuple[int, ...]] = field(init=False)
    heard_by: dict[int, frozenset[int]] = field(init=False)

    def __post_init__(self):
        if self.solid & self.dashed:
            raise ValueError("an edge cannot be both solid and dashed")
        solid_of: dict[int, list[int]] = {k: [] for k in self.users}
        heard: dict[int, set[int]] = {k: set() for k in self.users}
        for h, k in self.solid:
            solid_of[k].append(h)
            heard[k].add(h)
        for h, k in self.dashed:
            heard[k].add(h)
        self.solid_of = {k: tuple(sorted(v)) for k, v in solid_of.items()}
        self.heard_by = {k: frozenset(v) for k, v in heard.items()}
        bad = [k for k, hs in self.solid_of.items() if not hs]
        if bad:
            raise InfeasibleLayout(f"users not within a_cell of any helper: {bad}")

    def solid_users(self, h: int) -> list[int]:
        return sorted(k for g, k in self.solid if g == h)

    @property
    def edge_count(self) -> int:
        return len(self.solid) + len(self.dashed)


def build_collision_graph(layout: Layout) -> CollisionGraph:
    d = layout.distances() if layout.H else np.zeros((0, layout.K))
    solid, dashed = set(), set()
    for h, k in zip(*np.nonzero(d <= layout.a_interf)):
        (solid if d[h, k] <= layout.a_cell else dashed).add((int(h) + 1, int(k) + 1))
    return CollisionGraph(
        tuple(range(1, layout.H + 1)), tuple(range(1, layout.K + 1)),
        frozenset(solid), frozenset(dashed), layout.c_front, layout.c_access,
    )


@dataclass
class HelperConflictGraph:
    vertices: tuple[int, ...]
    edges: frozenset[tuple[int, int]]

    def neighbors(self) -> dict[int, set[int]]:
        adj = {v: set() for v in self.vertices}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj


def build_helper_conflict_graph(cg: CollisionGraph) -> HelperConflictGraph:
    edges = set()
    for k in cg.users:
        hs = sorted(cg.heard_by[k])
        for a in range(len(hs)):
            for b in range(a + 1, len(hs)):
                edges.add((hs[a], hs[b]))
    return HelperConflictGraph(cg.helpers, frozenset(edges))
