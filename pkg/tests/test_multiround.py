from fractions import Fraction
from itertools import combinations, permutations, product
from math import comb

import pytest

from cachenet.multiround import (
    append_user,
    build_delivery_array,
    column_slots,
    delivery_epochs,
    multiround_load,
    multiround_slots,
    round_xor_count,
)


def xors_touching(present_rows, L, tp):
    """Count (t'+1)-subsets of the groups that contain at least one present row."""
    return sum(1 for S in combinations(range(L), tp + 1) if set(S) & present_rows)


def _groups(occ):
    uid = iter(range(1, 1000))
    return {ell: [next(uid) for _ in range(a)] for ell, a in enumerate(occ, 1)}


def test_build_array_shapes():
    arr = build_delivery_array(_groups((3, 2, 1)), 3)
    assert arr.cells.shape == (3, 3)
    assert arr.occupancies() == [3, 2, 1]
    assert arr.presence() == [3, 2, 1]
    assert build_delivery_array({}, 4).n_cols == 0


def test_build_array_sorts_rows_and_ties_by_group():
    arr = build_delivery_array({1: [7], 2: [3, 9], 3: [5]}, 3)
    assert arr.row_groups == (2, 1, 3)
    assert arr.cells.tolist() == [[3, 9], [7, 0], [5, 0]]
    assert arr.column(0) == {2: 3, 1: 7, 3: 5}


def test_late_lists_pair_users():
    arr = build_delivery_array({2: [6], 3: [4]}, 3)
    assert arr.n_cols == 1
    assert sorted(arr.column(0).values()) == [4, 6]


def test_round_xor_count_examples():
    assert round_xor_count(3, 3, 1) == 3
    assert round_xor_count(1, 3, 1) == 2
    assert round_xor_count(0, 5, 2) == 0
    with pytest.raises(ValueError):
        round_xor_count(4, 3, 1)


def test_round_xor_count_matches_subset_count():
    for L in range(1, 7):
        for tp in range(L + 1):
            for p in range(L + 1):
                assert round_xor_count(p, L, tp) == xors_touching(set(range(p)), L, tp)


def test_multiround_load_examples():
    assert multiround_load((3, 2, 1), 3, 1) == Fraction(8, 3)
    assert multiround_load((1, 1, 1), 3, 1) == 1
    assert multiround_load((4, 0), 2, 2) == 0
    with pytest.raises(ValueError):
        multiround_load((1, -1), 2, 0)


def test_formula_equals_column_simulation_exhaustive():
    for L in range(1, 6):
        for tp in range(L + 1):
            for occ in product(range(7), repeat=L):
                arr = build_delivery_array(_groups(occ), L)
                sim = sum(xors_touching({i for i in range(L) if arr.cells[i, j]}, L, tp)
                          for j in range(arr.n_cols))
                assert multiround_slots(occ, L, tp) == sim
                assert multiround_load(occ, L, tp) == Fraction(sim, comb(L, tp))


def test_permutation_bound_exhaustive():
    for L in range(1, 6):
        for tp in range(L + 1):
            for occ in product(range(4), repeat=L):
                best = multiround_slots(occ, L, tp)
                for perm in set(permutations(occ)):
                    val = sum(perm[r - 1] * comb(L - r, tp) for r in range(1, L - tp + 1))
                    assert val <= best


def test_epochs_examples():
    assert delivery_epochs(build_delivery_array({1: [1]}, 3), 3, 1).epochs == (2,)
    assert delivery_epochs(build_delivery_array({1: [1], 2: [2]}, 3), 3, 1).epochs == (3,)
    assert delivery_epochs(build_delivery_array({1: [1, 2], 2: [3]}, 3), 3, 1).epochs == (3, 5)


def test_epochs_total_matches_load():
    for occ in product(range(4), repeat=4):
        arr = build_delivery_array(_groups(occ), 4)
        ep = delivery_epochs(arr, 4, 1)
        assert Fraction(ep.total, comb(4, 1)) == multiround_load(occ, 4, 1)
        assert all(a < b for a, b in zip(ep.epochs, ep.epochs[1:]))
    with pytest.raises(ValueError):
        delivery_epochs(build_delivery_array({1: [1]}, 3), 4, 1)


def test_append_user_cases():
    arr = append_user(build_delivery_array({}, 3), 9, 2)
    assert arr.n_cols == 1 and arr.column(0) == {2: 9}

    arr = build_delivery_array({1: [1]}, 3)
    arr = append_user(arr, 2, 2, first_open=1)
    assert arr.column(0) == {1: 1} and arr.column(1) == {2: 2}

    arr = append_user(build_delivery_array({1: [1]}, 3), 2, 2, first_open=0)
    assert arr.column(0) == {1: 1, 2: 2}

    arr = append_user(append_user(build_delivery_array({}, 2), 1, 1), 2, 1)
    assert arr.n_cols == 2 and arr.column(0) == {1: 1} and arr.column(1) == {1: 2}

    with pytest.raises(ValueError):
        append_user(arr, 2, 2)


def test_append_never_decreases_final_epoch():
    L, tp = 4, 1
    arr = build_delivery_array({}, L)
    last = 0
    for k, ell in enumerate([1, 3, 1, 2, 4, 4, 2, 1], 1):
        arr = append_user(arr, k, ell)
        total = sum(column_slots(arr, tp))
        assert total >= last
        last = total
