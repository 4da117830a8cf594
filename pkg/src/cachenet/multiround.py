"""Delivery arrays, per-column XOR counts, multiround loads and delivery epochs.

Slot counts are exact integers; a slot is one XOR packet of F / C(L, t') bits.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .model import binom


@dataclass(frozen=True)
class DeliveryArray:
    """L-row array of user ids (0 = empty); ``row_groups[i]`` is the group of row i."""

    cells: np.ndarray
    row_groups: tuple[int, ...]

    @property
    def L(self) -> int:
        return len(self.row_groups)

    @property
    def n_cols(self) -> int:
        return self.cells.shape[1]

    def presence(self) -> list[int]:
        """|R_j| for each column j."""
        return [int(np.count_nonzero(self.cells[:, j])) for j in range(self.n_cols)]

    def column(self, j: int) -> dict[int, int]:
        """{group: user} for the nonzero cells of column j."""
        return {self.row_groups[i]: int(u) for i, u in enumerate(self.cells[:, j]) if u}

    def occupancies(self) -> list[int]:
        return [int(np.count_nonzero(row)) for row in self.cells]

    def users(self) -> list[int]:
        return sorted(int(u) for u in self.cells.ravel() if u)


def build_delivery_array(groups: Mapping[int, Sequence[int]], L: int) -> DeliveryArray:
    """Rows = groups sorted by non-increasing size (ties by group id), left-justified."""
    order = sorted(range(1, L + 1), key=lambda ell: (-len(groups.get(ell, ())), ell))
    width = max((len(groups.get(ell, ())) for ell in order), default=0)
    cells = np.zeros((L, width), dtype=np.int64)
    for i, ell in enumerate(order):
        users = sorted(groups.get(ell, ()))
        cells[i, : len(users)] = users
    return DeliveryArray(cells, tuple(order))


def round_xor_count(present: int, L: int, t_prime: int) -> int:
    if not 0 <= present <= L:
        raise ValueError(f"present={present} outside [0, {L}]")
    return binom(L, t_prime + 1) - binom(L - present, t_prime + 1)


def multiround_slots(occupancies: Sequence[int], L: int, t_prime: int) -> int:
    A = sorted((int(a) for a in occupancies), reverse=True)
    A += [0] * (L - len(A))
    return sum(A[r - 1] * binom(L - r, t_prime) for r in range(1, L - t_prime + 1))


def multiround_load(occupancies: Sequence[int], L: int, t_prime: int) -> Fraction:
    if any(a < 0 for a in occupancies):
        raise ValueError("occupancy numbers must be non-negative")
    return Fraction(multiround_slots(occupancies, L, t_prime), binom(L, t_prime))


def column_slots(array: DeliveryArray, t_prime: int) -> list[int]:
    return [round_xor_count(p, array.L, t_prime) for p in array.presence()]


@dataclass(frozen=True)
class EpochTable:
    epochs: tuple[int, ...]

    @property
    def total(self) -> int:
        return self.epochs[-1] if self.epochs else 0


def delivery_epochs(array: DeliveryArray, L: int, t_prime: int) -> EpochTable:
    if array.L != L:
        raise ValueError(f"array has {array.L} rows, expected {L}")
    return EpochTable(tuple(int(x) for x in np.cumsum(column_slots(array, t_prime))))


def append_user(array: DeliveryArray, user: int, group: int, first_open: int = 0) -> DeliveryArray:
    """Place ``user`` in the row of ``group`` at the next available column.

    Columns before ``first_open`` have started transmitting and are never
    touched.  The array grows by one column when no open column has room.
    """
    if user in array.cells:
        raise ValueError(f"user {user} already in the array")
    row = array.row_groups.index(group)
    cells = array.cells
    for j in range(first_open, array.n_cols):
        if cells[row, j] == 0:
            out = cells.copy()
            out[row, j] = user
            return DeliveryArray(out, array.row_groups)
    width = max(array.n_cols, first_open) + 1
    out = np.zeros((array.L, width), dtype=np.int64)
    out[:, : array.n_cols] = cells
    out[row, width - 1] = user
    return DeliveryArray(out, array.row_groups)
