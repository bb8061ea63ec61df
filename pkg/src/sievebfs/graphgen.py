"""Kronecker graph generation, CSR construction and block-row partitioning.

Random numbers come from numpy's Philox4x64 counter-based bit generator seeded
with ``GraphConfig.seed``; for every bit level the generator produces two
blocks of ``M`` doubles (``Generator.random``), first the row draws and then
the column draws.  Relabeling, when enabled, draws one permutation
(``Generator.permutation(N)``) after all levels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, ConfigurationError, ContractViolation, DecodeError

GRAPH500_INITIATOR = (0.57, 0.19, 0.19, 0.05)
MAX_SCALE = 40
EDGE_FILE_MAGIC = b"KRONEL1\0"

# Doubles drawn per batch while generating; bounds peak memory at large scales.
_BATCH = 1 << 22


@dataclass(frozen=True)
class GraphConfig:
    scale: int
    edgefactor: int = 16
    seed: int = 0
    initiator: tuple[float, float, float, float] = GRAPH500_INITIATOR
    relabel: bool = False

    def __post_init__(self):
        if self.scale < 1:
            raise ConfigurationError(f"scale must be >= 1, got {self.scale}")
        if self.scale > MAX_SCALE:
            raise CapacityError(f"scale {self.scale} exceeds the supported maximum {MAX_SCALE}")
        if self.edgefactor < 1:
            raise ConfigurationError(f"edgefactor must be >= 1, got {self.edgefactor}")
        if self.num_edges >= 1 << 64:
            raise CapacityError("edge count does not fit in 64 bits")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if len(self.initiator) != 4 or any(x < 0 for x in self.initiator):
            raise ConfigurationError("initiator must be four non-negative probabilities")
        if abs(sum(self.initiator) - 1.0) > 1e-12:
            raise ConfigurationError(f"initiator sums to {sum(self.initiator)!r}, not 1")

    @property
    def num_vertices(self) -> int:
        return 1 << self.scale

    @property
    def num_edges(self) -> int:
        return self.edgefactor << self.scale


@dataclass(frozen=True)
class EdgeList:
    n: int
    edges: np.ndarray  # (M, 2) uint64

    def __post_init__(self):
        e = self.edges
        if e.ndim != 2 or e.shape[1] != 2:
            raise ContractViolation(f"edge array must have shape (M, 2), got {e.shape}")
        if e.size and int(e.max()) >= self.n:
            raise ContractViolation(f"vertex id {int(e.max())} >= n={self.n}")

    def __len__(self) -> int:
        return self.edges.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EdgeList):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def generate_kronecker(cfg: GraphConfig) -> EdgeList:
    a, b, c, _ = cfg.initiator
    ab = a + b
    a_norm = a / ab if ab > 0 else 0.0
    c_norm = c / (1.0 - ab) if ab < 1 else 0.0
    M = cfg.num_edges
    rng = make_rng(cfg.seed)

    edges = np.zeros((M, 2), dtype=np.uint64)
    for level in range(cfg.scale):
        bit = np.uint64(1 << level)
        for lo in range(0, M, _BATCH):
            hi = min(lo + _BATCH, M)
            ii = rng.random(hi - lo) > ab
            threshold = np.where(ii, c_norm, a_norm)
            jj = rng.random(hi - lo) > threshold
            edges[lo:hi, 0] |= ii.astype(np.uint64) * bit
            edges[lo:hi, 1] |= jj.astype(np.uint64) * bit

    if cfg.relabel:
        perm = rng.permutation(cfg.num_vertices).astype(np.uint64)
        edges = perm[edges]
    return EdgeList(cfg.num_vertices, edges)


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Pre-transposed adjacency: row ``v`` lists the sources ``u`` of edges ``u -> v``."""

    n: int
    row_offsets: np.ndarray  # int64, length n + 1
    column_indices: np.ndarray  # int64

    @property
    def nnz(self) -> int:
        return int(self.column_indices.size)

    def row(self, v: int) -> np.ndarray:
        return self.column_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())

    def has_edge(self, u: int, v: int) -> bool:
        r = self.row(v)
        k = np.searchsorted(r, u)
        return bool(k < r.size and r[k] == u)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=bool)
        out[self.row_ids(), self.column_indices] = True
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.column_indices, other.column_indices)
        )


def csr_from_rows(rows: Sequence[Sequence[int]]) -> CsrMatrix:
    """Build a CSR from explicit row lists, kept as given (test fixtures)."""
    offsets = np.zeros(len(rows) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(r) for r in rows])
    cols = np.array([c for r in rows for c in r], dtype=np.int64)
    return CsrMatrix(len(rows), offsets, cols)


def build_csr(edges: EdgeList | np.ndarray, n: int | None = None) -> CsrMatrix:
    """Symmetrize, drop self-loops and duplicates, sort each row."""
    if isinstance(edges, EdgeList):
        arr = edges.edges
        n = edges.n if n is None else n
    else:
        arr = np.asarray(edges, dtype=np.uint64).reshape(-1, 2)
    if n is None:
        raise ContractViolation("vertex count required")
    if arr.size and int(arr.max()) >= n:
        raise ContractViolation(f"vertex id {int(arr.max())} >= n={n}")

    u = arr[:, 0].astype(np.int64)
    v = arr[:, 1].astype(np.int64)
    keep = u != v
    u, v = u[keep], v[keep]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    if n <= 1 << 31:
        keys = np.unique(rows * n + cols)
        rows, cols = np.divmod(keys, n)
    else:
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
    if rows.size:
        fresh = np.empty(rows.size, dtype=bool)
        fresh[0] = True
        fresh[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        rows, cols = rows[fresh], cols[fresh]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    return CsrMatrix(n, offsets, cols)


def block_size(n: int, p: int) -> int:
    return -(-n // p)


def row_range(n: int, p: int, j: int) -> tuple[int, int]:
    """Rows ``[lo, hi)`` owned by rank ``j`` under ceil(n/p) blocking."""
    if not 0 <= j < p:
        raise ContractViolation(f"rank {j} outside [0, {p})")
    b = block_size(n, p)
    return min(j * b, n), min((j + 1) * b, n)


@dataclass(eq=False)
class CsrPartition:
    """Rank ``rank``'s block-row ``A_i`` of the global matrix.

    ``row_offsets`` is rebased to start at zero; ``column_indices`` is a view
    into the global array and keeps global column ids.
    """

    rank: int
    p: int
    n: int
    lo: int
    hi: int
    row_offsets: np.ndarray
    column_indices: np.ndarray
    _row_ids: np.ndarray | None = field(default=None, repr=False)
    _block_perm: np.ndarray | None = field(default=None, repr=False)
    _block_bounds: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_rows(self) -> int:
        return self.hi - self.lo

    @property
    def nnz(self) -> int:
        return int(self.column_indices.size)

    @property
    def block(self) -> int:
        return block_size(self.n, self.p)

    def row_range_of(self, j: int) -> tuple[int, int]:
        return row_range(self.n, self.p, j)

    def local_row_ids(self) -> np.ndarray:
        if self._row_ids is None:
            self._row_ids = np.repeat(
                np.arange(self.num_rows, dtype=np.int64), np.diff(self.row_offsets)
            )
        return self._row_ids

    def _blocked(self) -> tuple[np.ndarray, np.ndarray]:
        # Entry order grouped by owning rank of the column, row-major within a group.
        if self._block_perm is None:
            owner = self.column_indices // self.block
            self._block_perm = np.argsort(owner, kind="stable")
            self._block_bounds = np.searchsorted(
                owner[self._block_perm], np.arange(self.p + 1)
            )
        return self._block_perm, self._block_bounds

    def block_entries(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """(local rows, global columns) of sub-block ``A_{i,j}``, row-major."""
        if not 0 <= j < self.p:
            raise ContractViolation(f"rank {j} outside [0, {self.p})")
        perm, bounds = self._blocked()
        sel = perm[bounds[j] : bounds[j + 1]]
        return self.local_row_ids()[sel], self.column_indices[sel]

    def block_nnz(self, j: int) -> int:
        _, bounds = self._blocked()
        return int(bounds[j + 1] - bounds[j])

    def to_csr(self) -> CsrMatrix:
        return CsrMatrix(self.num_rows, self.row_offsets, self.column_indices)


def partition_rows(csr: CsrMatrix, p: int) -> list[CsrPartition]:
    if p < 1:
        raise ConfigurationError(f"rank count must be >= 1, got {p}")
    if p > max(csr.n, 1):
        raise ConfigurationError(f"rank count {p} exceeds vertex count {csr.n}")
    parts = []
    for i in range(p):
        lo, hi = row_range(csr.n, p, i)
        s, e = csr.row_offsets[lo], csr.row_offsets[hi]
        parts.append(
            CsrPartition(
                rank=i,
                p=p,
                n=csr.n,
                lo=lo,
                hi=hi,
                row_offsets=csr.row_offsets[lo : hi + 1] - s,
                column_indices=csr.column_indices[s:e],
            )
        )
    return parts


class SubBlockView:
    """Read-only iteration over the entries of ``A_{i,j}``.

    Holds only the partition and ``j``; entries are located through the
    partition's cached column-owner index, never by copying the CSR arrays.
    """

    def __init__(self, part: CsrPartition, j: int):
        if not 0 <= j < part.p:
            raise ContractViolation(f"rank {j} outside [0, {part.p})")
        self.part = part
        self.j = j
        self.col_lo, self.col_hi = part.row_range_of(j)

    def __len__(self) -> int:
        return self.part.block_nnz(self.j)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(global rows, global columns) as arrays."""
        rows, cols = self.part.block_entries(self.j)
        return rows + self.part.lo, cols

    def __iter__(self) -> Iterator[tuple[int, int]]:
        rows, cols = self.arrays()
        return zip(rows.tolist(), cols.tolist())

    def occupied_columns(self) -> np.ndarray:
        """Local column offsets (relative to rank j's first row) with any entry."""
        _, cols = self.part.block_entries(self.j)
        return np.unique(cols) - self.col_lo


def sub_block_columns(part: CsrPartition, j: int) -> SubBlockView:
    return SubBlockView(part, j)


# --- edge-list files -------------------------------------------------------

_FILE_HEADER = struct.Struct("<8sQQ")


def write_edge_list(path: str | Path, edges: EdgeList) -> None:
    with open(path, "wb") as fh:
        fh.write(_FILE_HEADER.pack(EDGE_FILE_MAGIC, edges.n, len(edges)))
        fh.write(np.ascontiguousarray(edges.edges, dtype="<u8").tobytes())


def read_edge_list(path: str | Path) -> EdgeList:
    data = Path(path).read_bytes()
    if len(data) < _FILE_HEADER.size:
        raise DecodeError(f"{path}: too short for an edge-list header")
    magic, n, count = _FILE_HEADER.unpack_from(data, 0)
    if magic != EDGE_FILE_MAGIC:
        raise DecodeError(f"{path}: bad magic {magic!r}")
    expected = _FILE_HEADER.size + 16 * count
    if len(data) != expected:
        raise DecodeError(f"{path}: {len(data)} bytes, header promises {expected}")
    edges = np.frombuffer(data, dtype="<u8", offset=_FILE_HEADER.size).reshape(count, 2)
    return EdgeList(n, edges.astype(np.uint64))
