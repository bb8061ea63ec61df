import numpy as np
import pytest

from sievebfs.bitmap import Bitmap
from sievebfs.errors import ContractViolation
from sievebfs.graphgen import partition_rows
from sievebfs.spmv import LevelState, expand, expand_blocked, update_visited

from helpers import random_csr
from oracles import brute_expand


def parents_of(exp):
    return dict(zip(exp.vertices.tolist(), exp.parents.tolist()))


def test_example_first_level(example_csr):
    (part,) = partition_rows(example_csr, 1)
    f0 = Bitmap.from_indices(8, [0])
    exp = expand(part, f0, f0.copy())
    assert exp.t == Bitmap.from_string("00110100")
    assert parents_of(exp) == {2: 0, 3: 0, 5: 0}


def test_zero_frontier_is_annihilator(example_csr):
    for part in partition_rows(example_csr, 2):
        exp = expand(part, Bitmap(8), Bitmap(part.num_rows))
        assert not exp.t.any() and exp.vertices.size == 0


def test_dimension_checks(example_csr):
    part = partition_rows(example_csr, 2)[0]
    with pytest.raises(ContractViolation):
        expand(part, Bitmap(7), Bitmap(4))
    with pytest.raises(ContractViolation):
        expand(part, Bitmap(8), Bitmap(5))
    with pytest.raises(ContractViolation):
        expand_blocked(part, [Bitmap(4), Bitmap(3)], Bitmap(4))
    with pytest.raises(ContractViolation):
        expand_blocked(part, [Bitmap(4)], Bitmap(4))


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("p", [1, 3, 4])
def test_expand_matches_brute_force(seed, p):
    rng = np.random.default_rng(seed)
    csr = random_csr(rng, 64, float(rng.uniform(0.02, 0.3)))
    dense = csr.to_dense()
    f = rng.random(64) < rng.uniform(0.05, 0.6)
    for part in partition_rows(csr, p):
        visited = rng.random(part.num_rows) < 0.3
        exp = expand(part, Bitmap.from_bools(f), Bitmap.from_bools(visited))
        t, parents = brute_expand(dense[part.lo : part.hi], f.tolist(), visited.tolist(), part.lo)
        assert exp.vertices.tolist() == t
        assert parents_of(exp) == parents


def test_blocked_expand_on_unsieved_example_frontier(example_csr):
    f0 = Bitmap.from_indices(8, [0])
    for part in partition_rows(example_csr, 4):
        pieces = [f0.slice(*part.row_range_of(j)) for j in range(4)]
        visited = f0.slice(part.lo, part.hi)
        assert parents_of(expand_blocked(part, pieces, visited)) == parents_of(
            expand(part, f0, visited)
        )


def test_blocked_expand_all_empty(example_csr):
    part = partition_rows(example_csr, 4)[2]
    exp = expand_blocked(part, [Bitmap(2)] * 4, Bitmap(2))
    assert not exp.t.any()


@pytest.mark.parametrize("seed", range(20))
def test_blocked_expand_with_sieved_pieces_equals_full_expand(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(8, 80))
    p = int(rng.integers(1, min(n, 9) + 1))
    csr = random_csr(rng, n, float(rng.uniform(0.02, 0.4)))
    parts = partition_rows(csr, p)
    f = Bitmap.from_bools(rng.random(n) < rng.uniform(0.05, 0.8))
    for part in parts:
        dense = csr.to_dense()[part.lo : part.hi]
        pieces = []
        for j in range(p):
            lo, hi = part.row_range_of(j)
            occupied = dense[:, lo:hi].any(axis=0)  # directory vector, recomputed here
            pieces.append(f.slice(lo, hi) & Bitmap.from_bools(occupied))
        visited = Bitmap.from_bools(rng.random(part.num_rows) < 0.2)
        a = expand_blocked(part, pieces, visited)
        b = expand(part, f, visited)
        assert a.t == b.t
        assert parents_of(a) == parents_of(b)


def test_update_visited_progression(example_csr):
    (part,) = partition_rows(example_csr, 1)
    state = LevelState.start(part, 0)
    assert state.visited.indices().tolist() == [0]
    seen = [[0]]
    while True:
        exp = expand(part, state.frontier, state.visited)
        state.record(exp)
        update_visited(state)
        if not state.frontier.any():
            break
        seen.append(state.frontier.indices().tolist())
    assert seen == [[0], [2, 3, 5], [4, 6, 7], [1]]
    assert state.visited == Bitmap.ones(8)
    assert state.parents.tolist() == [0, 7, 0, 0, 2, 0, 3, 5]


def test_update_visited_first_step(example_csr):
    (part,) = partition_rows(example_csr, 1)
    state = LevelState.start(part, 0)
    state.record(expand(part, state.frontier, state.visited))
    update_visited(state)
    assert state.visited.indices().tolist() == [0, 2, 3, 5]
    assert state.level == 1
    before = state.visited.copy()
    state.t = Bitmap(8)
    update_visited(state)
    assert state.visited == before
