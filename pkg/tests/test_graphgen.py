import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sievebfs.errors import CapacityError, ConfigurationError, ContractViolation, DecodeError
from sievebfs.graphgen import (
    EdgeList,
    GraphConfig,
    build_csr,
    generate_kronecker,
    make_rng,
    partition_rows,
    read_edge_list,
    sub_block_columns,
    write_edge_list,
)

from conftest import EXAMPLE_ROWS
from helpers import random_csr


def test_all_mass_in_first_quadrant_gives_self_loops_at_zero():
    el = generate_kronecker(GraphConfig(scale=1, edgefactor=1, seed=5, initiator=(1, 0, 0, 0)))
    # M = edgefactor * 2**scale = 2 tuples, every one forced to (0, 0)
    assert el.edges.tolist() == [[0, 0], [0, 0]]


@pytest.mark.parametrize("scale,edgefactor", [(1, 1), (5, 16), (10, 3)])
def test_edge_count_is_edgefactor_times_n(scale, edgefactor):
    el = generate_kronecker(GraphConfig(scale, edgefactor, seed=3))
    assert len(el) == edgefactor * 2**scale
    assert el.n == 2**scale
    assert int(el.edges.max()) < el.n


def test_edge_count_formula_at_scale_20():
    # Generating 16M tuples is slow; the count follows from the config alone.
    cfg = GraphConfig(20, 16)
    assert cfg.num_edges == 16_777_216


def test_generation_matches_scalar_rmat_recurrence():
    cfg = GraphConfig(scale=6, edgefactor=4, seed=11)
    el = generate_kronecker(cfg)
    a, b, c, _ = cfg.initiator
    rng = make_rng(cfg.seed)
    M = cfg.num_edges
    u = [0] * M
    v = [0] * M
    for level in range(cfg.scale):
        r1 = rng.random(M).tolist()
        r2 = rng.random(M).tolist()
        for e in range(M):
            down = r1[e] > a + b
            right = r2[e] > (c / (1 - a - b) if down else a / (a + b))
            u[e] += down << level
            v[e] += right << level
    assert el.edges[:, 0].tolist() == u
    assert el.edges[:, 1].tolist() == v


def test_generation_is_deterministic():
    cfg = GraphConfig(9, 8, seed=123)
    assert generate_kronecker(cfg) == generate_kronecker(cfg)
    assert generate_kronecker(cfg) != generate_kronecker(GraphConfig(9, 8, seed=124))


def test_relabel_is_a_permutation_of_the_plain_graph():
    plain = generate_kronecker(GraphConfig(8, 4, seed=9))
    relabeled = generate_kronecker(GraphConfig(8, 4, seed=9, relabel=True))
    assert sorted(np.bincount(plain.edges.ravel().astype(np.int64), minlength=256)) == sorted(
        np.bincount(relabeled.edges.ravel().astype(np.int64), minlength=256)
    )


def test_heavy_tail_regression_scale_10_seed_42():
    csr = build_csr(generate_kronecker(GraphConfig(10, 16, seed=42)))
    deg = csr.degrees()
    # Pinned from the first generation with this seed.
    assert int(deg.max()) == 475
    assert deg.mean() == pytest.approx(20.53125)
    assert deg.max() >= 8 * deg.mean()


@pytest.mark.parametrize(
    "kwargs,exc",
    [
        ({"scale": 0}, ConfigurationError),
        ({"scale": 41}, CapacityError),
        ({"scale": 4, "edgefactor": 0}, ConfigurationError),
        ({"scale": 4, "initiator": (0.5, 0.2, 0.2, 0.2)}, ConfigurationError),
    ],
)
def test_invalid_config(kwargs, exc):
    with pytest.raises(exc):
        GraphConfig(**kwargs)


def test_csr_of_example_graph(example_csr):
    assert example_csr.row_offsets.tolist() == [0, 3, 5, 7, 10, 12, 15, 17, 20]
    assert [example_csr.row(v).tolist() for v in range(8)] == EXAMPLE_ROWS


def test_csr_empty():
    csr = build_csr(EdgeList(4, np.zeros((0, 2), dtype=np.uint64)))
    assert csr.row_offsets.tolist() == [0, 0, 0, 0, 0]
    assert csr.nnz == 0


def test_csr_dedup_and_loop_removal():
    edges = np.array([(1, 2)] * 3 + [(2, 2)], dtype=np.uint64)
    csr = build_csr(EdgeList(3, edges))
    assert [csr.row(v).tolist() for v in range(3)] == [[], [2], [1]]


def test_csr_rejects_out_of_range_ids():
    with pytest.raises(ContractViolation):
        build_csr(np.array([[0, 5]], dtype=np.uint64), 4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 19), st.integers(0, 19)), max_size=80))
def test_csr_invariants(pairs):
    csr = build_csr(np.array(pairs, dtype=np.uint64).reshape(-1, 2), 20)
    assert csr.row_offsets[0] == 0 and csr.row_offsets[-1] == csr.nnz
    dense = csr.to_dense()
    assert (dense == dense.T).all()
    assert not dense.diagonal().any()
    for v in range(20):
        assert np.all(np.diff(csr.row(v)) > 0)
    expected = {(u, v) for u, v in pairs if u != v} | {(v, u) for u, v in pairs if u != v}
    assert set(zip(*np.nonzero(dense))) == expected


@pytest.mark.parametrize(
    "n,p,ranges",
    [
        (8, 4, [(0, 2), (2, 4), (4, 6), (6, 8)]),
        (8, 1, [(0, 8)]),
        (10, 4, [(0, 3), (3, 6), (6, 9), (9, 10)]),
    ],
)
def test_partition_ranges(n, p, ranges):
    csr = build_csr(np.zeros((0, 2), dtype=np.uint64), n)
    parts = partition_rows(csr, p)
    assert [(q.lo, q.hi) for q in parts] == ranges


def test_single_partition_is_identity(example_csr):
    (part,) = partition_rows(example_csr, 1)
    assert part.to_csr() == example_csr


def test_partition_rejects_more_ranks_than_vertices(example_csr):
    with pytest.raises(ConfigurationError):
        partition_rows(example_csr, 9)


def test_sub_block_example(example_csr):
    parts = partition_rows(example_csr, 4)
    assert list(sub_block_columns(parts[3], 1)) == [(6, 3)]
    with pytest.raises(ContractViolation):
        sub_block_columns(parts[3], 4)


def test_sub_block_views_share_partition_arrays(example_csr):
    part = partition_rows(example_csr, 4)[0]
    view = sub_block_columns(part, 1)
    assert view.part.column_indices.base is example_csr.column_indices
    assert len(view) == 2


def test_empty_sub_block(example_csr):
    parts = partition_rows(example_csr, 4)
    # rows {0,1} have no neighbour in {0,1}
    assert list(sub_block_columns(parts[0], 0)) == []


@pytest.mark.parametrize("p", [1, 2, 3, 5, 8, 32])
def test_sub_blocks_tile_the_matrix(p):
    csr = random_csr(np.random.default_rng(p), 32, 0.2)
    dense = csr.to_dense()
    entries = []
    parts = partition_rows(csr, p)
    assert sum(q.num_rows for q in parts) == 32
    assert np.array_equal(np.concatenate([q.column_indices for q in parts]), csr.column_indices)
    for part in parts:
        for j in range(p):
            lo, hi = part.row_range_of(j)
            block = list(sub_block_columns(part, j))
            assert all(lo <= c < hi and part.lo <= r < part.hi for r, c in block)
            entries.extend(block)
    assert sorted(entries) == sorted(zip(*map(np.ndarray.tolist, np.nonzero(dense))))


def test_edge_list_file_round_trip(tmp_path):
    el = generate_kronecker(GraphConfig(6, 4, seed=2))
    path = tmp_path / "g.kronel"
    write_edge_list(path, el)
    raw = path.read_bytes()
    assert raw[:8] == b"KRONEL1\0"
    assert int.from_bytes(raw[8:16], "little") == 64
    assert int.from_bytes(raw[16:24], "little") == len(el)
    assert len(raw) == 24 + 16 * len(el)
    assert read_edge_list(path) == el


def test_edge_list_file_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.kronel"
    path.write_bytes(b"NOTKRON\0" + bytes(16))
    with pytest.raises(DecodeError):
        read_edge_list(path)
