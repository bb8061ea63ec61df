"""Level-synchronous distributed BFS in three variants.

``bit``      raw local frontier bitmaps exchanged with all-gather
``wah``      the same, each rank's frontier compressed before the exchange
``dir-wah``  per-destination frontier pieces, sieved through the cross
             directory and compressed, exchanged with all-to-all

Every variant runs one worker per rank on a :class:`~sievebfs.fabric.Fabric`
and returns the same :class:`BfsResult`; they differ only in what travels.
"""

from __future__ import annotations

import os
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from . import codecs
from .bitmap import Bitmap, nbytes_for
from .codecs import Codec, WahCodec
from .directory import CrossDirectory, init_cross_directory, sieve_encode
from .errors import ContractViolation, ValidationError
from .fabric import CommStats, CostModelParams, Fabric, estimate_time
from .graphgen import CsrMatrix, CsrPartition, EdgeList
from .spmv import NO_PARENT, LevelState, expand, expand_blocked, update_visited
from .wah import encode_bytes, word_bytes

TRAVERSING = "traversing"
REDUCING = "reducing"
COMMUNICATION = "communication"
COMPRESSION = "compression & sieve"
PHASES = (TRAVERSING, REDUCING, COMMUNICATION, COMPRESSION)


class AlgorithmKind(str, Enum):
    BIT = "bit"
    WAH = "wah"
    DIR_WAH = "dir-wah"

    @classmethod
    def parse(cls, text: str) -> "AlgorithmKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ContractViolation(f"unknown algorithm {text!r}") from None


@dataclass(eq=False)
class BfsResult:
    source: int
    parents: np.ndarray  # NO_PARENT for unreached vertices
    levels: np.ndarray  # -1 for unreached vertices
    d: int  # non-empty frontier levels, source level included

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BfsResult):
            return NotImplemented
        return (
            self.source == other.source
            and self.d == other.d
            and np.array_equal(self.parents, other.parents)
            and np.array_equal(self.levels, other.levels)
        )

    @property
    def visited(self) -> np.ndarray:
        return self.levels >= 0

    def level_sets(self) -> list[list[int]]:
        return [np.flatnonzero(self.levels == k).tolist() for k in range(self.d)]


@dataclass
class LevelRecord:
    level: int
    frontier_count: int
    raw_bytes: int
    sparse_bytes: int
    wah_bytes: int
    sent_total: int
    sent_per_rank: list[int]
    reduce_bytes: int
    uncompressed_bytes: int
    compressed_bytes: int
    phase_wall_s: dict[str, float]
    phase_sim_s: dict[str, float]

    @property
    def compression_ratio(self) -> float | None:
        """``C_k = uncompressed / compressed`` for levels that were compressed."""
        if self.compressed_bytes == 0:
            return None
        return self.uncompressed_bytes / self.compressed_bytes

    def to_dict(self, include_wall: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "level": self.level,
            "frontier_count": self.frontier_count,
            "bytes": {
                "raw": self.raw_bytes,
                "sparse": self.sparse_bytes,
                "wah": self.wah_bytes,
                "sent_total": self.sent_total,
                "sent_per_rank": list(self.sent_per_rank),
                "reduce_total": self.reduce_bytes,
                "uncompressed": self.uncompressed_bytes,
                "compressed": self.compressed_bytes,
            },
        }
        if include_wall:
            out["phase_wall_s"] = dict(self.phase_wall_s)
        out["phase_sim_s"] = dict(self.phase_sim_s)
        return out


@dataclass
class RunReport:
    algorithm: AlgorithmKind
    codec: str | None
    p: int
    n: int
    source: int
    levels: list[LevelRecord]
    d: int
    volume_per_rank: list[int]
    level_comm_bytes: int
    reduce_bytes: int
    init_bytes: int
    C: float | None
    C_prime: float | None
    m: int
    wall_time_s: float
    sim_time_s: float
    cost: CostModelParams
    validation: dict[str, Any] | None = None
    extra_config: dict[str, Any] = field(default_factory=dict)

    @property
    def volume(self) -> int:
        return max(self.volume_per_rank) if self.volume_per_rank else 0

    @property
    def teps(self) -> float:
        return compute_teps(self.m, self.wall_time_s) if self.wall_time_s > 0 else 0.0

    def to_dict(self, include_wall: bool = True) -> dict[str, Any]:
        totals: dict[str, Any] = {
            "volume_max_rank": self.volume,
            "volume_per_rank": list(self.volume_per_rank),
            "level_comm_bytes": self.level_comm_bytes,
            "reduce_bytes": self.reduce_bytes,
            "init_bytes": self.init_bytes,
            "C": self.C,
            "C_prime": self.C_prime,
            "d": self.d,
            "m": self.m,
            "sim_time_s": self.sim_time_s,
        }
        if include_wall:
            totals["teps"] = self.teps
            totals["wall_time_s"] = self.wall_time_s
        config = {
            "algorithm": self.algorithm.value,
            "codec": self.codec,
            "ranks": self.p,
            "n": self.n,
            "source": self.source,
            "alpha": self.cost.alpha,
            "beta": self.cost.beta,
            **self.extra_config,
        }
        return {
            "config": config,
            "per_level": [rec.to_dict(include_wall) for rec in self.levels],
            "totals": totals,
            "validation": self.validation,
        }


def compute_teps(m: int, seconds: float) -> float:
    if seconds <= 0:
        raise ContractViolation(f"elapsed time must be positive, got {seconds}")
    return m / seconds


# --- per-rank worker ---------------------------------------------------------


@dataclass
class _RankLevel:
    count: int = 0
    uncompressed: int = 0
    compressed: int = 0
    wall: dict[str, float] = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))


@dataclass
class _RankOutcome:
    parents: np.ndarray
    levels: np.ndarray
    per_level: dict[int, _RankLevel]
    elapsed: float


def _sieve_threads() -> int:
    try:
        return max(1, int(os.environ.get("BFS_SIEVE_THREADS", "1")))
    except ValueError:
        return 1


class _RankWorker:
    def __init__(
        self,
        kind: AlgorithmKind,
        part: CsrPartition,
        fabric: Fabric,
        source: int,
        codec: Codec | None,
        directory: CrossDirectory | None,
        pool: ThreadPoolExecutor | None,
    ):
        self.kind = kind
        self.part = part
        self.fabric = fabric
        self.source = source
        self.codec = codec
        self.directory = directory
        self.pool = pool
        self.per_level: dict[int, _RankLevel] = defaultdict(_RankLevel)

    @contextmanager
    def _timed(self, level: int, phase: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.per_level[level].wall[phase] += time.perf_counter() - t0

    def _initial_frontier(self):
        n, p = self.part.n, self.part.p
        if self.kind is AlgorithmKind.DIR_WAH:
            pieces = []
            for j in range(p):
                lo, hi = self.part.row_range_of(j)
                piece = Bitmap(hi - lo)
                if lo <= self.source < hi:
                    piece.set_bit(self.source - lo)
                pieces.append(piece)
            return pieces
        return Bitmap.from_indices(n, [self.source])

    def run(self) -> _RankOutcome:
        part, fabric, rank = self.part, self.fabric, self.part.rank
        start = time.perf_counter()
        state = LevelState.start(part, self.source)
        frontier = self._initial_frontier()
        level = 0
        while True:
            nxt = level + 1
            with self._timed(nxt, TRAVERSING):
                if self.kind is AlgorithmKind.DIR_WAH:
                    exp = expand_blocked(part, frontier, state.visited)
                else:
                    exp = expand(part, frontier, state.visited)
                state.record(exp)
                update_visited(state)
                count = state.frontier.popcount()
            with self._timed(nxt, REDUCING):
                total = fabric.allreduce_sum(rank, count, phase=REDUCING, level=nxt)
            self.per_level[nxt].count = count
            if total == 0:
                break
            frontier = self._exchange(state.frontier, nxt)
            level = nxt
        return _RankOutcome(state.parents, state.levels, dict(self.per_level), time.perf_counter() - start)

    def _exchange(self, f_i: Bitmap, level: int):
        rec = self.per_level[level]
        raw_size = nbytes_for(f_i.nbits)
        if self.kind is AlgorithmKind.BIT:
            with self._timed(level, COMMUNICATION):
                got = self.fabric.allgatherv(self.part.rank, f_i.data.tobytes(), level=level)
                pieces = [
                    Bitmap(hi - lo, np.frombuffer(buf, dtype=np.uint8).copy())
                    for buf, (lo, hi) in zip(got, self._ranges())
                ]
                return Bitmap.concat(pieces)

        if self.kind is AlgorithmKind.WAH:
            with self._timed(level, COMPRESSION):
                msg = codecs.encode(self.codec, f_i)
            rec.uncompressed += raw_size
            rec.compressed += len(msg)
            with self._timed(level, COMMUNICATION):
                got = self.fabric.allgatherv(self.part.rank, msg, level=level)
            with self._timed(level, COMPRESSION):
                return Bitmap.concat([codecs.decode(m) for m in got])

        columns = self.directory.columns
        with self._timed(level, COMPRESSION):
            if self.pool is not None:
                msgs = list(self.pool.map(lambda v: sieve_encode(f_i, v, self.codec), columns))
            else:
                msgs = [sieve_encode(f_i, v, self.codec) for v in columns]
        rec.uncompressed += raw_size * len(msgs)
        rec.compressed += sum(len(m) for m in msgs)
        with self._timed(level, COMMUNICATION):
            got = self.fabric.alltoallv(self.part.rank, msgs, level=level)
        with self._timed(level, COMPRESSION):
            return [codecs.decode(m) for m in got]

    def _ranges(self):
        return [self.part.row_range_of(j) for j in range(self.part.p)]


# --- orchestration -----------------------------------------------------------


def _check_inputs(parts: Sequence[CsrPartition], fabric: Fabric, source: int) -> int:
    if not parts:
        raise ContractViolation("no partitions")
    if fabric.p != len(parts):
        raise ContractViolation(f"fabric has {fabric.p} ranks, got {len(parts)} partitions")
    n = parts[0].n
    if not 0 <= source < n:
        raise ContractViolation(f"source {source} outside [0, {n})")
    return n


def _traversed_edge_tuples(levels: np.ndarray, edges: EdgeList | None, parts) -> int:
    if edges is not None:
        u = edges.edges[:, 0].astype(np.int64)
        return int(np.count_nonzero(levels[u] >= 0))
    # Without raw tuples fall back to undirected edges of the cleaned graph.
    nnz = 0
    for part in parts:
        rows = np.flatnonzero(levels[part.lo : part.hi] >= 0)
        nnz += int(np.diff(part.row_offsets)[rows].sum())
    return nnz // 2


def _mean_inverse_ratio(records: Sequence[LevelRecord]) -> float | None:
    ratios = [r.compression_ratio for r in records if r.compression_ratio is not None]
    if not ratios:
        return None
    return float(sum(1.0 / c for c in ratios) / len(ratios))


def run_bfs(
    kind: AlgorithmKind | str,
    parts: Sequence[CsrPartition],
    fabric: Fabric,
    source: int,
    codec: Codec | str | None = None,
    *,
    directories: Sequence[CrossDirectory] | None = None,
    edges: EdgeList | None = None,
    cost: CostModelParams | None = None,
) -> tuple[BfsResult, RunReport]:
    kind = AlgorithmKind.parse(kind) if isinstance(kind, str) else kind
    n = _check_inputs(parts, fabric, source)
    p = len(parts)
    cost = cost or CostModelParams()
    if kind is AlgorithmKind.BIT:
        codec = None
    else:
        codec = codecs.parse_codec(codec) if isinstance(codec, str) else (codec or WahCodec(64))

    init_epoch = fabric.epoch
    if kind is AlgorithmKind.DIR_WAH and directories is None:
        directories = init_cross_directory(parts, fabric)
    if kind is AlgorithmKind.DIR_WAH and len(directories) != p:
        raise ContractViolation(f"expected {p} cross directories, got {len(directories)}")
    bfs_epoch = fabric.epoch

    threads = _sieve_threads() if kind is AlgorithmKind.DIR_WAH else 1
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        workers = [
            _RankWorker(
                kind, parts[r], fabric, source, codec,
                directories[r] if directories is not None else None, pool,
            )
            for r in range(p)
        ]
        t0 = time.perf_counter()
        outcomes: list[_RankOutcome] = fabric.run(lambda r: workers[r].run())
        wall = time.perf_counter() - t0
    finally:
        if pool is not None:
            pool.shutdown()

    parents = np.concatenate([o.parents for o in outcomes])
    levels = np.concatenate([o.levels for o in outcomes])
    d = int(levels.max()) + 1
    result = BfsResult(source, parents, levels, d)

    all_entries = fabric.ledger
    init_stats = CommStats(p, [e for e in all_entries if init_epoch <= e.epoch < bfs_epoch])
    stats = CommStats(p, [e for e in all_entries if e.epoch >= bfs_epoch])

    records = []
    W = codec.word_width if isinstance(codec, WahCodec) else 64
    for k in range(d + 1):
        mask = levels == k
        count = int(np.count_nonzero(mask))
        level_stats = stats.select(level=k)
        comm = level_stats.select(COMMUNICATION)
        bitmap = Bitmap.from_bools(mask)
        wah = encode_bytes(bitmap.data, n, W)
        walls = {ph: max((o.per_level.get(k).wall[ph] if k in o.per_level else 0.0)
                         for o in outcomes) for ph in PHASES}
        sim = estimate_time(level_stats, cost)
        sim.pop("total", None)
        records.append(
            LevelRecord(
                level=k,
                frontier_count=count,
                raw_bytes=nbytes_for(n),
                sparse_bytes=8 * count,
                wah_bytes=(wah.words.size + 1) * word_bytes(W),
                sent_total=comm.total_bytes(),
                sent_per_rank=comm.bytes_by_rank().tolist(),
                reduce_bytes=level_stats.select(REDUCING).total_bytes(),
                uncompressed_bytes=sum(o.per_level[k].uncompressed for o in outcomes if k in o.per_level),
                compressed_bytes=sum(o.per_level[k].compressed for o in outcomes if k in o.per_level),
                phase_wall_s={ph: walls[ph] for ph in PHASES},
                phase_sim_s={ph: sim.get(ph, 0.0) for ph in (REDUCING, COMMUNICATION)},
            )
        )

    ratio = _mean_inverse_ratio(records) if kind is not AlgorithmKind.BIT else None
    report = RunReport(
        algorithm=kind,
        codec=codec.spec if codec is not None else None,
        p=p,
        n=n,
        source=source,
        levels=records,
        d=d,
        volume_per_rank=stats.bytes_by_rank().tolist(),
        level_comm_bytes=stats.select(COMMUNICATION).total_bytes(),
        reduce_bytes=stats.select(REDUCING).total_bytes(),
        init_bytes=init_stats.total_bytes(),
        C=ratio if kind is AlgorithmKind.WAH else None,
        C_prime=ratio if kind is AlgorithmKind.DIR_WAH else None,
        m=_traversed_edge_tuples(levels, edges, parts),
        wall_time_s=wall,
        sim_time_s=estimate_time(stats, cost)["total"],
        cost=cost,
    )
    return result, report


def bfs_baseline(parts, fabric, s, **kw) -> tuple[BfsResult, RunReport]:
    """Raw bitmap frontiers, all-gathered every level."""
    return run_bfs(AlgorithmKind.BIT, parts, fabric, s, **kw)


def bfs_compressed(parts, fabric, s, codec: Codec | str = "wah:64", **kw):
    """Compress each rank's frontier, all-gather, decompress."""
    return run_bfs(AlgorithmKind.WAH, parts, fabric, s, codec, **kw)


def bfs_sieve_compressed(parts, fabric, s, codec: Codec | str = "wah:64", **kw):
    """Sieve per destination through the cross directory, compress, all-to-all."""
    return run_bfs(AlgorithmKind.DIR_WAH, parts, fabric, s, codec, **kw)


# --- validation --------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool
    errors: dict[str, list[int]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "errors": {k: v[:20] for k, v in sorted(self.errors.items())},
            "error_counts": {k: len(v) for k, v in sorted(self.errors.items())},
        }

    def raise_if_failed(self) -> None:
        if not self.ok:
            detail = "; ".join(f"{k}: {v[:10]}" for k, v in sorted(self.errors.items()))
            raise ValidationError(f"BFS tree validation failed: {detail}")


def validate(result: BfsResult, csr: CsrMatrix) -> ValidationReport:
    """Graph500-style checks of a BFS tree against the cleaned graph.

    Offending vertex ids are listed per violated rule.
    """
    n = csr.n
    s = result.source
    parents = np.asarray(result.parents, dtype=np.int64)
    levels = np.asarray(result.levels, dtype=np.int64)
    errors: dict[str, list[int]] = {}

    def flag(rule: str, vertices) -> None:
        v = np.asarray(vertices, dtype=np.int64)
        if v.size:
            errors[rule] = sorted(set(v.tolist()))

    if parents.shape != (n,) or levels.shape != (n,):
        return ValidationReport(False, {"shape": [parents.size, levels.size]})
    if not 0 <= s < n:
        return ValidationReport(False, {"source_out_of_range": [s]})
    if parents[s] != s or levels[s] != 0:
        errors["source_not_root"] = [s]

    visited = levels >= 0
    flag("parent_level_mismatch", np.flatnonzero(visited != (parents != NO_PARENT)))

    others = np.flatnonzero(visited & (parents != NO_PARENT))
    others = others[others != s]
    par = parents[others]
    bad_range = (par < 0) | (par >= n)
    flag("parent_out_of_range", others[bad_range])
    others, par = others[~bad_range], par[~bad_range]

    rows = csr.row_ids()
    keys = rows * n + csr.column_indices  # sorted: rows ascending, columns sorted per row
    query = others * n + par
    pos = np.searchsorted(keys, query)
    found = pos < keys.size
    found[found] = keys[pos[found]] == query[found]
    flag("tree_edge_missing", others[~found])
    flag("level_not_parent_plus_one", others[levels[others] != levels[par] + 1])

    u, v = rows, csr.column_indices
    both = visited[u] & visited[v]
    flag("edge_spans_levels", u[both & (np.abs(levels[u] - levels[v]) > 1)])
    flag("unvisited_neighbor_of_visited", v[visited[u] & ~visited[v]])
    if result.d != (int(levels.max()) + 1 if visited.any() else 0):
        errors["level_count"] = [result.d]
    return ValidationReport(not errors, errors)
