"""Frontier expansion as SpMV over the (select, max) semiring.

Multiplying row ``v`` of ``A_i`` by the frontier selects every frontier
neighbor ``u`` of ``v``; the semiring addition keeps the largest such label,
which becomes ``v``'s parent.  The visited mask is applied after the full
product, as one ``and-not``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bitmap import Bitmap
from .errors import ContractViolation
from .graphgen import CsrPartition

NO_PARENT = -1


@dataclass
class Expansion:
    """Newly discovered local vertices and the parent each one selected."""

    t: Bitmap  # local length
    vertices: np.ndarray  # global ids, ascending
    parents: np.ndarray  # global ids, aligned with ``vertices``


def _last_active_per_row(rows: np.ndarray, cols: np.ndarray, active: np.ndarray):
    """Per row, the largest active column; rows/cols must be row-major sorted."""
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    r = rows[idx]
    last = np.empty(idx.size, dtype=bool)
    last[-1] = True
    last[:-1] = r[1:] != r[:-1]
    return r[last], cols[idx[last]]


def _mask_and_collect(part: CsrPartition, best: np.ndarray, visited: Bitmap) -> Expansion:
    hit = best >= 0
    t = Bitmap.from_bools(hit).and_not(visited)
    local = t.indices()
    return Expansion(t, local + part.lo, best[local])


def expand(part: CsrPartition, f: Bitmap, visited: Bitmap) -> Expansion:
    """``t_i = (A_i ⊗ f) ⊙ ¬π_i`` with max-label parent selection."""
    if f.nbits != part.n:
        raise ContractViolation(f"frontier has {f.nbits} bits, graph has {part.n} vertices")
    if visited.nbits != part.num_rows:
        raise ContractViolation(
            f"visited has {visited.nbits} bits, partition has {part.num_rows} rows"
        )
    rows = part.local_row_ids()
    cols = part.column_indices
    active = f.to_bools()[cols]
    best = np.full(part.num_rows, NO_PARENT, dtype=np.int64)
    r, c = _last_active_per_row(rows, cols, active)
    best[r] = c
    return _mask_and_collect(part, best, visited)


def expand_blocked(part: CsrPartition, pieces: Sequence[Bitmap], visited: Bitmap) -> Expansion:
    """``t_i = Σ_j A_{i,j} ⊗ f_{i,j}`` masked by ``¬π_i``.

    Each block contributes its own per-row maximum; the running maximum over
    blocks gives the global max-label parent.
    """
    if len(pieces) != part.p:
        raise ContractViolation(f"expected {part.p} frontier pieces, got {len(pieces)}")
    if visited.nbits != part.num_rows:
        raise ContractViolation(
            f"visited has {visited.nbits} bits, partition has {part.num_rows} rows"
        )
    best = np.full(part.num_rows, NO_PARENT, dtype=np.int64)
    for j, piece in enumerate(pieces):
        lo, hi = part.row_range_of(j)
        if piece.nbits != hi - lo:
            raise ContractViolation(
                f"piece {j} has {piece.nbits} bits, rank {j} owns {hi - lo} rows"
            )
        if not piece.any() or part.block_nnz(j) == 0:
            continue
        rows, cols = part.block_entries(j)
        active = piece.to_bools()[cols - lo]
        r, c = _last_active_per_row(rows, cols, active)
        best[r] = np.maximum(best[r], c)
    return _mask_and_collect(part, best, visited)


@dataclass
class LevelState:
    """One rank's BFS state between levels."""

    part: CsrPartition
    visited: Bitmap
    frontier: Bitmap  # local f_i
    parents: np.ndarray  # per local row, NO_PARENT until discovered
    levels: np.ndarray
    level: int = 0
    t: Bitmap | None = field(default=None)

    @classmethod
    def start(cls, part: CsrPartition, source: int) -> "LevelState":
        visited = Bitmap(part.num_rows)
        parents = np.full(part.num_rows, NO_PARENT, dtype=np.int64)
        levels = np.full(part.num_rows, -1, dtype=np.int64)
        if part.lo <= source < part.hi:
            visited.set_bit(source - part.lo)
            parents[source - part.lo] = source
            levels[source - part.lo] = 0
        return cls(part, visited, visited.copy(), parents, levels)

    def record(self, exp: Expansion) -> None:
        """Store parents and depth for vertices discovered at the next level."""
        local = exp.vertices - self.part.lo
        self.parents[local] = exp.parents
        self.levels[local] = self.level + 1
        self.t = exp.t


def update_visited(state: LevelState) -> LevelState:
    """``π_i ← π_i ∨ t_i``, ``f_i ← t_i``, advance the level counter."""
    t = state.t if state.t is not None else Bitmap(state.visited.nbits)
    state.visited.or_assign(t)
    state.frontier = t
    state.t = None
    state.level += 1
    return state
