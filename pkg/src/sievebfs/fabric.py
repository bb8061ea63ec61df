"""In-process simulation of ``p`` message-passing ranks.

Each rank is a worker thread.  Collectives are bulk-synchronous rendezvous:
every rank deposits its contribution, the last arrival computes all results
and the byte ledger, then everyone is released.  Byte accounting charges the
sender for fan-out (``(p-1)`` copies for all-gather), plus an 8-byte size
preamble per peer for the variable-size collectives.
"""

from __future__ import annotations

import logging
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation, DeadlockError, FabricError

log = logging.getLogger(__name__)

PREAMBLE_BYTES = 8
REDUCE_BYTES = 8
DEFAULT_TIMEOUT = 120.0


@dataclass(frozen=True)
class LedgerEntry:
    epoch: int
    op: str
    phase: str
    level: int | None
    rank: int
    payload_bytes: int
    preamble_bytes: int
    messages: int
    received_bytes: int

    @property
    def sent_bytes(self) -> int:
        return self.payload_bytes + self.preamble_bytes


@dataclass(frozen=True)
class CostModelParams:
    """Per-message latency ``alpha`` (s) and per-byte transfer time ``beta`` (s/B)."""

    alpha: float = 2e-6
    beta: float = 2e-10  # 40 Gb/s link

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigurationError("alpha and beta must be non-negative")


class CommStats:
    """Read-only aggregation over ledger entries."""

    def __init__(self, p: int, entries: Iterable[LedgerEntry]):
        self.p = p
        self.entries = list(entries)

    def select(
        self,
        phase: str | Sequence[str] | None = None,
        level: int | None = None,
        exclude_phases: Sequence[str] = (),
    ) -> "CommStats":
        phases = {phase} if isinstance(phase, str) else (set(phase) if phase else None)
        keep = [
            e
            for e in self.entries
            if (phases is None or e.phase in phases)
            and (level is None or e.level == level)
            and e.phase not in exclude_phases
        ]
        return CommStats(self.p, keep)

    def bytes_by_rank(self) -> np.ndarray:
        out = np.zeros(self.p, dtype=np.int64)
        for e in self.entries:
            out[e.rank] += e.sent_bytes
        return out

    def received_by_rank(self) -> np.ndarray:
        out = np.zeros(self.p, dtype=np.int64)
        for e in self.entries:
            out[e.rank] += e.received_bytes
        return out

    def messages_by_rank(self) -> np.ndarray:
        out = np.zeros(self.p, dtype=np.int64)
        for e in self.entries:
            out[e.rank] += e.messages
        return out

    def total_bytes(self) -> int:
        return int(self.bytes_by_rank().sum())

    def volume(self) -> int:
        """Communication volume: the largest per-rank byte count."""
        return int(self.bytes_by_rank().max()) if self.p else 0

    @property
    def phases(self) -> list[str]:
        return sorted({e.phase for e in self.entries})

    @property
    def levels(self) -> list[int]:
        return sorted({e.level for e in self.entries if e.level is not None})


def estimate_time(stats: CommStats, params: CostModelParams) -> dict[str, float]:
    """``T = α·messages + β·bytes`` per rank; each phase and the total take the max rank."""
    out: dict[str, float] = {}
    for phase in stats.phases:
        sub = stats.select(phase)
        per_rank = params.alpha * sub.messages_by_rank() + params.beta * sub.bytes_by_rank()
        out[phase] = float(per_rank.max())
    per_rank = params.alpha * stats.messages_by_rank() + params.beta * stats.bytes_by_rank()
    out["total"] = float(per_rank.max()) if stats.p else 0.0
    return out


class Fabric:
    def __init__(self, p: int, timeout: float = DEFAULT_TIMEOUT):
        if p < 1:
            raise ConfigurationError(f"fabric needs at least one rank, got {p}")
        self.p = p
        self.timeout = timeout
        self._cond = threading.Condition()
        self._epoch = 0
        self._pending: dict[int, tuple[str, str, int | None, Any]] = {}
        self._results: dict[int, list[Any]] = {}
        self._unread: dict[int, int] = {}
        self._aborted: BaseException | None = None
        self._ledger: list[LedgerEntry] = []

    # --- driving workers ---------------------------------------------------

    def run(self, fn: Callable[[int], Any]) -> list[Any]:
        """Call ``fn(rank)`` once per rank, concurrently; return results by rank."""
        if self.p == 1:
            return [fn(0)]
        results: list[Any] = [None] * self.p
        errors: list[tuple[int, BaseException]] = []

        def worker(rank: int) -> None:
            try:
                results[rank] = fn(rank)
            except BaseException as exc:  # noqa: BLE001 - re-raised below
                errors.append((rank, exc))
                self.abort(exc)

        threads = [
            threading.Thread(target=worker, args=(r,), name=f"rank-{r}", daemon=True)
            for r in range(self.p)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            # The first failure is the cause; the rest are aborted collectives.
            primary = [e for e in errors if not isinstance(e[1], FabricError)] or errors
            raise primary[0][1]
        return results

    def abort(self, exc: BaseException) -> None:
        with self._cond:
            if self._aborted is None:
                self._aborted = exc
            self._cond.notify_all()

    # --- ledger --------------------------------------------------------------

    @property
    def ledger(self) -> list[LedgerEntry]:
        with self._cond:
            return list(self._ledger)

    def stats(self) -> CommStats:
        return CommStats(self.p, self.ledger)

    @property
    def epoch(self) -> int:
        return self._epoch

    # --- collectives -------------------------------------------------------

    def _check_rank(self, rank: int) -> None:
        if not 0 <= rank < self.p:
            raise ContractViolation(f"rank {rank} outside [0, {self.p})")

    def _rendezvous(self, rank: int, op: str, phase: str, level: int | None, value: Any) -> Any:
        self._check_rank(rank)
        with self._cond:
            if self._aborted is not None:
                raise FabricError(f"fabric aborted: {self._aborted!r}")
            epoch = self._epoch
            if rank in self._pending:
                raise FabricError(f"rank {rank} entered epoch {epoch} twice")
            self._pending[rank] = (op, phase, level, value)
            if len(self._pending) == self.p:
                self._complete(epoch)
            else:
                done = self._cond.wait_for(
                    lambda: self._epoch > epoch or self._aborted is not None, self.timeout
                )
                if self._aborted is not None and self._epoch == epoch:
                    raise FabricError(f"fabric aborted: {self._aborted!r}")
                if not done:
                    missing = sorted(set(range(self.p)) - set(self._pending))
                    err = DeadlockError(
                        f"{op} epoch {epoch}: ranks {missing} did not arrive "
                        f"within {self.timeout}s"
                    )
                    self._aborted = err
                    self._cond.notify_all()
                    raise err
            out = self._results[epoch][rank]
            self._unread[epoch] -= 1
            if self._unread[epoch] == 0:
                del self._results[epoch], self._unread[epoch]
            return out

    def _complete(self, epoch: int) -> None:
        calls = [self._pending[r] for r in range(self.p)]
        ops = {c[0] for c in calls}
        if len(ops) != 1:
            err = FabricError(f"epoch {epoch}: ranks called different collectives {sorted(ops)}")
            self._aborted = err
            self._cond.notify_all()
            raise err
        op, phase, level, _ = calls[0]
        values = [c[3] for c in calls]
        results, entries = getattr(self, f"_do_{op}")(epoch, phase, level, values)
        self._ledger.extend(entries)
        self._results[epoch] = results
        self._unread[epoch] = self.p
        self._pending = {}
        self._epoch += 1
        self._cond.notify_all()

    def _do_allgatherv(self, epoch, phase, level, payloads):
        p = self.p
        sizes = [len(b) for b in payloads]
        total = sum(sizes)
        entries = [
            LedgerEntry(
                epoch,
                "allgatherv",
                phase,
                level,
                r,
                payload_bytes=(p - 1) * sizes[r],
                preamble_bytes=(p - 1) * PREAMBLE_BYTES,
                messages=p - 1,
                received_bytes=(total - sizes[r]) + (p - 1) * PREAMBLE_BYTES,
            )
            for r in range(p)
        ]
        gathered = list(payloads)
        return [list(gathered) for _ in range(p)], entries

    def _do_alltoallv(self, epoch, phase, level, matrix):
        p = self.p
        for r, row in enumerate(matrix):
            if len(row) != p:
                raise FabricError(f"rank {r} supplied {len(row)} payloads for {p} ranks")
        entries = []
        for r in range(p):
            sent = sum(len(matrix[r][j]) for j in range(p) if j != r)
            got = sum(len(matrix[j][r]) for j in range(p) if j != r)
            entries.append(
                LedgerEntry(
                    epoch,
                    "alltoallv",
                    phase,
                    level,
                    r,
                    payload_bytes=sent,
                    preamble_bytes=(p - 1) * PREAMBLE_BYTES,
                    messages=p - 1,
                    received_bytes=got + (p - 1) * PREAMBLE_BYTES,
                )
            )
        results = [[matrix[j][r] for j in range(p)] for r in range(p)]
        return results, entries

    def _do_allreduce_sum(self, epoch, phase, level, values):
        p = self.p
        total = sum(values)
        entries = [
            LedgerEntry(
                epoch,
                "allreduce_sum",
                phase,
                level,
                r,
                payload_bytes=(p - 1) * REDUCE_BYTES,
                preamble_bytes=0,
                messages=p - 1,
                received_bytes=(p - 1) * REDUCE_BYTES,
            )
            for r in range(p)
        ]
        return [total] * p, entries

    def _do_barrier(self, epoch, phase, level, values):
        return [None] * self.p, []

    def allgatherv(
        self, rank: int, payload: bytes, *, phase: str = "communication", level: int | None = None
    ) -> list[bytes]:
        """Every rank receives every rank's payload, in rank order."""
        return self._rendezvous(rank, "allgatherv", phase, level, bytes(payload))

    def alltoallv(
        self,
        rank: int,
        payloads: Sequence[bytes],
        *,
        phase: str = "communication",
        level: int | None = None,
    ) -> list[bytes]:
        """``payloads[j]`` goes to rank ``j``; returns what each source sent here."""
        return self._rendezvous(
            rank, "alltoallv", phase, level, [bytes(b) for b in payloads]
        )

    def allreduce_sum(
        self, rank: int, value: int, *, phase: str = "reducing", level: int | None = None
    ) -> int:
        return self._rendezvous(rank, "allreduce_sum", phase, level, int(value))

    def barrier(self, rank: int) -> None:
        self._rendezvous(rank, "barrier", "barrier", None, None)


def conservation_by_epoch(entries: Iterable[LedgerEntry]) -> dict[int, tuple[int, int]]:
    """``epoch -> (bytes sent, bytes received)`` summed over ranks."""
    acc: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    for e in entries:
        acc[e.epoch][0] += e.sent_bytes
        acc[e.epoch][1] += e.received_bytes
    return {k: (v[0], v[1]) for k, v in acc.items()}
