"""Avalanche scheduling on the collision model.

Helpers run multiround delivery arrays.  A user is scheduled on helper h only
when h is its sole contender: no other active helper, and no idle helper that
still has unscheduled users within ``a_cell``, reaches it.  When helpers stop,
their interfered neighbours become schedulable and the next wave starts.
All times are in XOR slots; a slot lasts F / (C(L, t') min(C_access, C_front)).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .model import CacheAssignment, CacheScheme
from .multiround import DeliveryArray, append_user, build_delivery_array, round_xor_count
from .scenario import CollisionGraph, InfeasibleLayout

EVENT_KINDS = ("activate", "serve", "columnDone", "stop")


class Status(Enum):
    WAITING = "waiting"
    ACTIVE = "active"
    STOPPED = "stopped"


@dataclass(frozen=True)
class Event:
    t_slots: int
    event: str
    helper: int
    users: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"t_slots": self.t_slots, "event": self.event, "helper": self.helper, "users": list(self.users)}


@dataclass
class ScheduleTrace:
    events: list[Event] = field(default_factory=list)

    def add(self, t, kind, helper, users=()):
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if self.events and t < self.events[-1].t_slots:
            raise ValueError("trace times must be non-decreasing")
        self.events.append(Event(int(t), kind, int(helper), tuple(int(u) for u in users)))

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.event == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict()) + "\n" for e in self.events)

    @classmethod
    def from_jsonl(cls, text: str) -> "ScheduleTrace":
        tr = cls()
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                tr.add(d["t_slots"], d["event"], d["helper"], d["users"])
        return tr


class AvalancheStall(RuntimeError):
    pass


@dataclass
class AvalancheResult:
    slots: int
    seconds: float
    trace: ScheduleTrace
    iterations: int


class _Run:
    def __init__(self, cg: CollisionGraph, assignment: CacheAssignment, scheme: CacheScheme):
        self.cg = cg
        self.group = assignment.group_of
        self.L, self.tp = scheme.L, scheme.t_prime
        self.status = {h: Status.WAITING for h in cg.helpers}
        self.arrays: dict[int, DeliveryArray] = {}
        self.done: dict[int, int] = {}
        self.col_start: dict[int, int] = {}
        self.helper_of: dict[int, int] = {}
        self.completed: set[int] = set()
        self.solid_users = {h: cg.solid_users(h) for h in cg.helpers}
        self.D = 0
        self.trace = ScheduleTrace()

    # -- sets ------------------------------------------------------------

    def free(self, k) -> bool:
        return k not in self.helper_of

    def active(self) -> list[int]:
        return [h for h in self.cg.helpers if self.status[h] is Status.ACTIVE]

    def contenders(self) -> set[int]:
        out = set(self.active())
        for h in self.cg.helpers:
            if self.status[h] is Status.WAITING and any(self.free(k) for k in self.solid_users[h]):
                out.add(h)
        return out

    def servable(self, h, contenders) -> list[int]:
        return [
            k for k in self.solid_users[h]
            if self.free(k) and self.cg.heard_by[k] & (contenders | {h}) == {h}
        ]

    def column_end(self, h) -> int:
        col = self.arrays[h].presence()[self.done[h]]
        return self.col_start[h] + round_xor_count(col, self.L, self.tp)

    # -- steps -----------------------------------------------------------

    def activation_pass(self, contenders) -> bool:
        contenders = set(contenders)
        changed = False
        for h in self.cg.helpers:
            if self.status[h] is Status.ACTIVE:
                continue
            users = self.servable(h, contenders)
            if not users:
                continue
            pending = [k for k, g in self.helper_of.items() if k not in self.completed]
            if any(h in self.cg.heard_by[k] for k in pending):
                continue
            groups: dict[int, list[int]] = {}
            for k in users:
                groups.setdefault(self.group[k], []).append(k)
            self.arrays[h] = build_delivery_array(groups, self.L)
            self.done[h] = 0
            self.col_start[h] = self.D
            self.status[h] = Status.ACTIVE
            for k in users:
                self.helper_of[k] = h
            self.trace.add(self.D, "activate", h, users)
            self.trace.add(self.D, "serve", h, users)
            contenders.add(h)
            changed = True
        return changed

    def append_pass(self, contenders) -> None:
        for h in self.active():
            for k in self.servable(h, contenders):
                first_open = self.done[h] if self.col_start[h] == self.D else self.done[h] + 1
                self.arrays[h] = append_user(self.arrays[h], k, self.group[k], first_open)
                self.helper_of[k] = h
                self.trace.add(self.D, "serve", h, [k])

    def schedule(self) -> None:
        self.append_pass(self.contenders())
        self.activation_pass(self.contenders())
        if not self.active() and len(self.helper_of) < len(self.cg.users):
            # nobody is transmitting: only the active set can interfere
            self.activation_pass(set())

    def state_dump(self) -> str:
        return json.dumps({
            "D": self.D,
            "status": {h: s.value for h, s in self.status.items()},
            "scheduled": self.helper_of,
            "completed": sorted(self.completed),
        })

    def run(self) -> int:
        self.schedule()
        iterations = 0
        K = len(self.cg.users)
        while len(self.completed) < K:
            active = self.active()
            if not active:
                raise AvalancheStall("no helper can transmit; state: " + self.state_dump())
            iterations += 1
            ends = {h: self.column_end(h) for h in active}
            self.D = min(ends.values())
            finishing = [h for h in active if ends[h] == self.D]
            for h in finishing:
                users = list(self.arrays[h].column(self.done[h]).values())
                self.trace.add(self.D, "columnDone", h, sorted(users))
                self.completed.update(users)
                self.done[h] += 1
                self.col_start[h] = self.D
            if len(self.completed) == K:
                for h in self.active():
                    self.status[h] = Status.STOPPED
                    self.trace.add(self.D, "stop", h)
                break
            for h in finishing:
                if self.done[h] == self.arrays[h].n_cols:
                    self.status[h] = Status.STOPPED
                    self.trace.add(self.D, "stop", h)
            self.schedule()
        self.iterations = iterations
        return self.D


def slot_seconds(scheme: CacheScheme, c_front: float, c_access: float, F: float = 1.0) -> float:
    return F / (scheme.subpacketization * min(c_access, c_front))


def avalanche_run(
    cg: CollisionGraph,
    assignment: CacheAssignment,
    scheme: CacheScheme,
    c_front: float | None = None,
    c_access: float | None = None,
    F: float = 1.0,
) -> AvalancheResult:
    uncovered = [k for k in cg.users if not cg.solid_of.get(k)]
    if uncovered:
        raise InfeasibleLayout(f"users without a solid edge: {uncovered}")
    c_front = cg.c_front if c_front is None else c_front
    c_access = cg.c_access if c_access is None else c_access
    run = _Run(cg, assignment, scheme)
    if not cg.users:
        return AvalancheResult(0, 0.0, run.trace, 0)
    D = run.run()
    return AvalancheResult(D, D * slot_seconds(scheme, c_front, c_access, F), run.trace, run.iterations)


# --------------------------------------------------------------------------
# Replay
# --------------------------------------------------------------------------


def replay_violations(trace: ScheduleTrace, cg: CollisionGraph, scheme: CacheScheme) -> list[str]:
    """Re-derive every helper's on-air intervals from the trace and check that
    each served user hears exactly its serving helper while its column is on
    air, that each user is scheduled and completed exactly once, and that every
    column lasts the XOR count its presence implies."""
    out = []
    on_air: dict[int, list[tuple[int, int]]] = {}
    started: dict[int, int] = {}
    col_from: dict[int, int] = {}
    served: list[tuple[int, int, int, int]] = []  # user, helper, start, end
    serve_count: dict[int, int] = {}
    done_count: dict[int, int] = {}
    for e in trace.events:
        h = e.helper
        if e.event == "activate":
            if h in started:
                out.append(f"helper {h} activated twice without stopping at t={e.t_slots}")
            started[h] = e.t_slots
            col_from[h] = e.t_slots
        elif e.event == "stop":
            if h not in started:
                out.append(f"helper {h} stopped while idle at t={e.t_slots}")
                continue
            on_air.setdefault(h, []).append((started.pop(h), e.t_slots))
        elif e.event == "serve":
            for k in e.users:
                serve_count[k] = serve_count.get(k, 0) + 1
        elif e.event == "columnDone":
            if h not in started:
                out.append(f"helper {h} finished a column while idle at t={e.t_slots}")
                continue
            start = col_from[h]
            want = round_xor_count(len(e.users), scheme.L, scheme.t_prime)
            if e.t_slots - start != want:
                out.append(f"helper {h} column [{start},{e.t_slots}) lasts {e.t_slots - start}, expected {want}")
            for k in e.users:
                done_count[k] = done_count.get(k, 0) + 1
                served.append((k, h, start, e.t_slots))
            col_from[h] = e.t_slots
    for h, t0 in started.items():
        out.append(f"helper {h} never stopped (active since t={t0})")

    for k, h, a, b in served:
        if (h, k) not in cg.solid:
            out.append(f"user {k} served by helper {h} without a solid edge")
        for g in cg.heard_by[k] - {h}:
            for s, t in on_air.get(g, []):
                if s < b and a < t:
                    out.append(f"user {k} on helper {h} during [{a},{b}) also hears helper {g} on air [{s},{t})")
    for k in cg.users:
        if serve_count.get(k, 0) != 1:
            out.append(f"user {k} scheduled {serve_count.get(k, 0)} times")
        if done_count.get(k, 0) != 1:
            out.append(f"user {k} completed {done_count.get(k, 0)} times")
    return out
