"""File library, cache-replication prefetching and XOR multicast codec.

Bits are carried as 1-D ``numpy.uint8`` arrays holding 0/1 values.  Users,
files and caching groups are numbered from 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**6)
    return Fraction(value)


@dataclass(frozen=True)
class LibraryParams:
    N: int
    F: int
    M: Fraction

    def __post_init__(self):
        object.__setattr__(self, "M", _as_fraction(self.M))
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.F < 1:
            raise ValueError(f"F must be >= 1, got {self.F}")
        if not 0 <= self.M <= self.N:
            raise ValueError(f"M must lie in [0, N]; got M={self.M}, N={self.N}")

    @property
    def mu(self) -> Fraction:
        return self.M / self.N


@dataclass(frozen=True)
class CacheScheme:
    L: int
    t_prime: int
    subsets: tuple[tuple[int, ...], ...]

    @property
    def subpacketization(self) -> int:
        return len(self.subsets)

    def index(self, subset: Sequence[int]) -> int:
        return self.subsets.index(tuple(sorted(subset)))

    def multicast_subsets(self) -> list[tuple[int, ...]]:
        """All (t'+1)-subsets of the groups, lexicographic."""
        return list(combinations(range(1, self.L + 1), self.t_prime + 1))

    def subfile_bits(self, F: int) -> int:
        if F % self.subpacketization:
            raise ValueError(
                f"F={F} is not divisible by the subpacketization C({self.L},{self.t_prime})"
                f"={self.subpacketization}"
            )
        return F // self.subpacketization


def replication_parameter(L: int, mu) -> int:
    """Integer t' = L*mu, or ValueError when L*mu is fractional."""
    t = L * _as_fraction(mu)
    if t.denominator != 1 or not 0 <= t <= L:
        raise ValueError(f"L*M/N = {L}*{_as_fraction(mu)} = {t} is not an integer in [0, {L}]")
    return int(t)


def subpacketize(params: LibraryParams, L: int) -> CacheScheme:
    t = L * params.M / params.N
    if t.denominator != 1 or not 0 <= t <= L:
        raise ValueError(
            f"t' = L*M/N = {L}*{params.M}/{params.N} = {float(t):g} is not an integer in [0, {L}]"
        )
    t_prime = int(t)
    return CacheScheme(L, t_prime, tuple(combinations(range(1, L + 1), t_prime)))


def round_up_file_size(F: int, scheme: CacheScheme | int) -> int:
    """Smallest F' >= F that splits evenly into the scheme's subfiles
    (or into ``scheme`` parts when given an integer)."""
    n = scheme if isinstance(scheme, int) else scheme.subpacketization
    return -(-F // n) * n


@dataclass(frozen=True, order=True)
class SubfileId:
    file: int
    subset: tuple[int, ...]


def build_cache_configuration(scheme: CacheScheme, ell: int, params: LibraryParams) -> set[SubfileId]:
    if not 1 <= ell <= scheme.L:
        raise ValueError(f"cache configuration index {ell} outside [1, {scheme.L}]")
    return {
        SubfileId(i, T)
        for T in scheme.subsets
        if ell in T
        for i in range(1, params.N + 1)
    }


@dataclass(frozen=True)
class CacheAssignment:
    group_of: Mapping[int, int]
    L: int

    @property
    def partition(self) -> dict[int, tuple[int, ...]]:
        cells: dict[int, list[int]] = {ell: [] for ell in range(1, self.L + 1)}
        for k in sorted(self.group_of):
            cells[self.group_of[k]].append(k)
        return {ell: tuple(users) for ell, users in cells.items()}

    def restricted(self, users: Iterable[int]) -> "CacheAssignment":
        return CacheAssignment({k: self.group_of[k] for k in users}, self.L)


def assign_caches(K: int, L: int, seed) -> CacheAssignment:
    """Each user picks one of the L configurations uniformly and independently."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(1, L + 1, size=K)
    return CacheAssignment({k + 1: int(labels[k]) for k in range(K)}, L)


def man_load(K: int, t: int) -> Fraction:
    if not 0 <= t <= K:
        raise ValueError(f"t={t} outside [0, {K}]")
    return Fraction(K - t, 1 + t)


# --------------------------------------------------------------------------
# Bit-level library and codec
# --------------------------------------------------------------------------


def random_library(N: int, F: int, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return rng.integers(0, 2, size=(N, F), dtype=np.uint8)


def subfile(library: np.ndarray, scheme: CacheScheme, sid: SubfileId) -> np.ndarray:
    n = scheme.subfile_bits(library.shape[1])
    j = scheme.index(sid.subset)
    return library[sid.file - 1, j * n : (j + 1) * n]


def cache_contents(library: np.ndarray, scheme: CacheScheme, ell: int) -> dict[SubfileId, np.ndarray]:
    params = LibraryParams(library.shape[0], library.shape[1], Fraction(0))
    return {
        sid: subfile(library, scheme, sid).copy()
        for sid in build_cache_configuration(scheme, ell, params)
    }


@dataclass(frozen=True)
class Segment:
    """``length`` bits of ``subfile`` starting at bit ``start``, destined to ``user``."""

    user: int
    subfile: SubfileId
    start: int
    length: int


@dataclass(frozen=True)
class XorMessage:
    subset: tuple[int, ...]
    payload: np.ndarray
    layout: Mapping[int, tuple[Segment, ...]] = field(default_factory=dict)
    helper: int | None = None

    @property
    def per_recipient_lengths(self) -> dict[int, int]:
        return {seg.user: seg.length for segs in self.layout.values() for seg in segs}

    def offset_of(self, user: int) -> tuple[int, Segment] | None:
        for segs in self.layout.values():
            pos = 0
            for seg in segs:
                if seg.user == user:
                    return pos, seg
                pos += seg.length
        return None


def encode_group_xor(
    subset: Sequence[int],
    group_segments: Mapping[int, Sequence[tuple[Segment, np.ndarray]]],
    helper: int | None = None,
) -> XorMessage:
    """XOR the per-group concatenations of segments, zero-padding to the longest."""
    S = tuple(sorted(subset))
    for ell, segs in group_segments.items():
        if segs and ell not in S:
            raise ValueError(f"group {ell} contributes segments but is not in S={S}")
    parts = {
        ell: np.concatenate([bits for _, bits in segs]).astype(np.uint8)
        if segs
        else np.zeros(0, np.uint8)
        for ell, segs in group_segments.items()
        if ell in S
    }
    width = max((len(p) for p in parts.values()), default=0)
    payload = np.zeros(width, np.uint8)
    for bits in parts.values():
        payload[: len(bits)] ^= bits
    layout = {
        ell: tuple(seg for seg, _ in segs) for ell, segs in group_segments.items() if segs
    }
    return XorMessage(S, payload, layout, helper)


def man_xor_messages(library: np.ndarray, demands: Mapping[int, int], K: int, t) -> list[XorMessage]:
    """Shared-link MAN delivery: one message per (t+1)-subset of users."""
    t_frac = _as_fraction(t)
    if t_frac.denominator != 1:
        raise ValueError(f"t={t} is not an integer")
    t = int(t_frac)
    scheme = CacheScheme(K, t, tuple(combinations(range(1, K + 1), t)))
    n = scheme.subfile_bits(library.shape[1])
    messages = []
    for S in scheme.multicast_subsets():
        segs = {}
        for k in S:
            sid = SubfileId(demands[k], tuple(x for x in S if x != k))
            segs[k] = [(Segment(k, sid, 0, n), subfile(library, scheme, sid))]
        messages.append(encode_group_xor(S, segs))
    return messages


class DecodeError(ValueError):
    pass


def decode_at_user(
    user: int,
    group: int,
    demand: int,
    messages: Iterable[XorMessage],
    cache: Mapping[SubfileId, np.ndarray],
    scheme: CacheScheme,
    F: int,
) -> np.ndarray:
    """Rebuild file ``demand`` at ``user`` from its cache and the received messages.

    Interfering components are regenerated from the cache and XORed out.
    Raises DecodeError naming the first (S, bit range) left uncovered.
    """
    n = scheme.subfile_bits(F)
    out = np.zeros(F, np.uint8)
    covered = np.zeros(F, bool)
    for T in scheme.subsets:
        if group in T:
            j = scheme.index(T)
            out[j * n : (j + 1) * n] = cache[SubfileId(demand, T)]
            covered[j * n : (j + 1) * n] = True

    for msg in messages:
        found = msg.offset_of(user)
        if found is None:
            continue
        offset, seg = found
        if seg.subfile.file != demand or group not in msg.subset:
            raise DecodeError(f"message for S={msg.subset} carries a foreign segment {seg}")
        window = msg.payload[offset : offset + seg.length].copy()
        for ell, segs in msg.layout.items():
            if ell == group:
                continue
            pos = 0
            for other in segs:
                lo, hi = max(pos, offset), min(pos + other.length, offset + seg.length)
                if lo < hi:
                    try:
                        known = cache[other.subfile]
                    except KeyError:
                        raise DecodeError(
                            f"user {user} cannot cancel {other.subfile} in S={msg.subset}"
                        ) from None
                    a = other.start + lo - pos
                    window[lo - offset : hi - offset] ^= known[a : a + hi - lo]
                pos += other.length
        j = scheme.index(seg.subfile.subset)
        base = j * n + seg.start
        out[base : base + seg.length] = window
        covered[base : base + seg.length] = True

    if not covered.all():
        miss = int(np.flatnonzero(~covered)[0])
        j, off = divmod(miss, n)
        T = scheme.subsets[j]
        end = off
        while end < n and not covered[j * n + end]:
            end += 1
        S = tuple(sorted(set(T) | {group}))
        raise DecodeError(f"user {user}: S={S} bits [{off}, {end}) of W_{demand},{T} not received")
    return out


def split_lengths(total: int, weights: Sequence[float]) -> list[int]:
    """Integer split of ``total`` proportional to ``weights`` (largest remainder)."""
    w = np.asarray(weights, float)
    if total == 0 or w.sum() <= 0:
        return [0] * len(w)
    raw = total * w / w.sum()
    base = np.floor(raw).astype(int)
    rest = total - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:rest]] += 1
    return base.tolist()


def route_segments(
    helpers_of: Mapping[int, Sequence[int]],
    assignment: CacheAssignment,
    scheme: CacheScheme,
    demands: Mapping[int, int],
    F: int,
    fractions: Mapping[tuple[int, tuple[int, ...], int], float] | None = None,
) -> dict[tuple[int, tuple[int, ...]], dict[int, list[Segment]]]:
    """Cut each missing subfile into per-helper segments.

    ``fractions[(k, S, h)]`` gives the share of W_{d_k, S minus ell_k} sent via
    helper h (uniform over H_k when omitted).  Returns
    ``{(h, S): {ell: [Segment, ...]}}`` with users ascending inside each group.
    """
    n = scheme.subfile_bits(F)
    plan: dict[tuple[int, tuple[int, ...]], dict[int, list[Segment]]] = {}
    for k in sorted(assignment.group_of):
        ell = assignment.group_of[k]
        hs = sorted(helpers_of[k])
        for S in scheme.multicast_subsets():
            if ell not in S:
                continue
            T = tuple(x for x in S if x != ell)
            sid = SubfileId(demands[k], T)
            w = [1.0 if fractions is None else fractions.get((k, S, h), 0.0) for h in hs]
            start = 0
            for h, length in zip(hs, split_lengths(n, w)):
                if length:
                    plan.setdefault((h, S), {}).setdefault(ell, []).append(Segment(k, sid, start, length))
                start += length
    return plan


def encode_plan(library: np.ndarray, scheme: CacheScheme, plan) -> list[XorMessage]:
    messages = []
    for (h, S), groups in sorted(plan.items()):
        segs = {
            ell: [(seg, subfile(library, scheme, seg.subfile)[seg.start : seg.start + seg.length]) for seg in lst]
            for ell, lst in groups.items()
        }
        messages.append(encode_group_xor(S, segs, helper=h))
    return messages


def worst_case_demands(users: Iterable[int], N: int) -> dict[int, int]:
    """Distinct demands d_k = k mod N + 1."""
    return {k: k % N + 1 for k in users}


def binom(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0
