from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tables
from pairfiber import MarginVector, ModelSpec, PairTable, TooSmall, design_matrix, margins
from pairfiber.markov import (
    MarkovMove,
    connectivity_check,
    generate_basis,
    normal_form,
    reduction_potential,
    sorted_table,
)
from pairfiber.table import pair_offset


def test_basis_sizes():
    assert len(generate_basis(4)) == 4
    assert len(generate_basis(5)) == 20
    assert len(generate_basis(22)) == 29_260 == 4 * comb(22, 4)
    with pytest.raises(TooSmall):
        generate_basis(3)


def test_basis_moves_distinct_and_in_kernel():
    for n in (4, 5, 8, 22):
        basis = generate_basis(n)
        vecs = np.stack([m.vector(n) for m in basis])
        assert len({v.tobytes() for v in vecs}) == len(basis)
        assert not np.any(design_matrix(ModelSpec.no_proximity(n)) @ vecs.T)
        # the compiled offsets agree with the move vectors
        dense = np.zeros_like(vecs)
        rows = np.arange(len(basis))
        for arr, sign in ((basis.plus1, 1), (basis.plus2, 1), (basis.minus1, -1), (basis.minus2, -1)):
            np.add.at(dense, (rows, arr), sign)
        assert np.array_equal(dense, vecs)


def test_move_variants():
    a = MarkovMove((1, 2, 3, 4), "A")
    v = a.vector(4)
    assert v[pair_offset(4, 1, 2)] == 1 and v[pair_offset(4, 3, 4)] == 1
    assert v[pair_offset(4, 1, 3)] == -1 and v[pair_offset(4, 2, 4)] == -1
    b = MarkovMove((1, 2, 3, 4), "B")
    w = b.vector(4)
    assert w[pair_offset(4, 1, 4)] == 1 and w[pair_offset(4, 2, 3)] == 1
    assert w[pair_offset(4, 1, 3)] == -1 and w[pair_offset(4, 2, 4)] == -1
    assert np.array_equal(a.negated().vector(4), -v)
    assert str(a) == "m[1,2;3,4]" and str(b.negated()) == "-m[1,4;2,3]"
    with pytest.raises(ValueError):
        MarkovMove((1, 3, 2, 4))


def test_normal_form_single_reduction():
    # the aligned pair is rewritten to the crossing pair
    t = PairTable.from_cells(4, {(1, 2): 1, (3, 4): 1})
    res = normal_form(t)
    assert res.table == PairTable.from_cells(4, {(1, 3): 1, (2, 4): 1})
    assert res.steps == 1
    assert margins(res.table).u.tolist() == [1, 1, 1, 1]


def test_nested_pair_reduces_to_crossing():
    t = PairTable.from_cells(4, {(1, 4): 2, (2, 3): 2})
    res = normal_form(t)
    assert res.table == PairTable.from_cells(4, {(1, 3): 2, (2, 4): 2})
    assert res.steps == 2


def test_sorted_tables_are_fixed_points():
    t = PairTable.from_cells(4, {(1, 3): 1, (2, 4): 1})
    assert normal_form(t) == (t, 0)
    u = MarginVector(np.array([3, 5, 2, 4, 6, 2]))
    s = sorted_table(u)
    assert margins(s) == u
    assert normal_form(s) == (s, 0)


def test_sorted_table_rejects_empty_fiber():
    with pytest.raises(ValueError):
        sorted_table(MarginVector(np.array([6, 1, 1, 0])))


def test_small_n_is_its_own_normal_form():
    t = PairTable(3, [1, 2, 3])
    assert normal_form(t) == (t, 0)


@settings(max_examples=200, deadline=None)
@given(tables(min_n=4, max_n=8, max_count=5), st.integers(0, 2**32 - 1))
def test_normal_form_is_the_sorted_table(t, seed):
    target = sorted_table(margins(t))
    bulk = normal_form(t)
    assert bulk.table == target
    rng = np.random.default_rng(seed)
    assert normal_form(t, rng=rng).table == target
    unit = normal_form(t, rng=rng, unit=True)
    assert unit.table == target
    assert normal_form(bulk.table) == (bulk.table, 0)
    # every unit step lowers the potential by at least two
    drop = reduction_potential(t) - reduction_potential(target)
    assert 2 * bulk.steps <= drop and 2 * unit.steps <= drop


def _aligned_sinks(t: PairTable) -> set[bytes]:
    """All irreducible tables reachable under the aligned orientation (crossing and nested -> aligned)."""
    n = t.n
    rules = []
    for i, j, k, l in combinations(range(1, n + 1), 4):
        to = (pair_offset(n, i, j), pair_offset(n, k, l))
        rules.append(((pair_offset(n, i, k), pair_offset(n, j, l)), to))
        rules.append(((pair_offset(n, i, l), pair_offset(n, j, k)), to))
    seen, sinks, stack = set(), set(), [t.values.copy()]
    while stack:
        cur = stack.pop()
        key = cur.tobytes()
        if key in seen:
            continue
        seen.add(key)
        moved = False
        for (a, b), (c, d) in rules:
            if cur[a] > 0 and cur[b] > 0:
                nxt = cur.copy()
                nxt[a] -= 1
                nxt[b] -= 1
                nxt[c] += 1
                nxt[d] += 1
                stack.append(nxt)
                moved = True
        if not moved:
            sinks.add(key)
    return sinks


def test_aligned_orientation_is_not_confluent():
    # the reason reduction runs toward the crossing matching instead
    u = MarginVector(np.full(6, 2))
    a = PairTable.from_cells(6, {(1, 2): 1, (2, 3): 1, (3, 4): 1, (4, 5): 1, (5, 6): 1, (1, 6): 1})
    assert margins(a) == u
    assert len(_aligned_sinks(a)) >= 2


@pytest.mark.parametrize("u", [(1, 1, 1, 1), (2, 2, 2, 2), (3, 1, 2, 2), (2, 2, 2, 2, 2), (3, 2, 1, 2, 4), (4, 4, 2, 3, 1)])
def test_connectivity_on_small_fibers(u):
    mv = MarginVector(np.array(u))
    assert connectivity_check(mv, generate_basis(len(u)))


def test_connectivity_rejects_mismatched_basis():
    with pytest.raises(ValueError):
        connectivity_check(MarginVector(np.array([1, 1, 1, 1])), generate_basis(5))


def test_table1_normal_form(table1):
    res = normal_form(table1)
    assert res.table == sorted_table(margins(table1))
    assert res.steps > 0
