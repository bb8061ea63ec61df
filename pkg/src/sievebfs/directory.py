"""Directory vectors, cross directories and frontier sieving."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import codecs
from .bitmap import Bitmap
from .codecs import Codec
from .errors import ContractViolation
from .fabric import Fabric
from .graphgen import CsrPartition, SubBlockView

INIT_PHASE = "init"


@dataclass(frozen=True)
class DirectoryVector:
    """Bit ``k`` set iff column ``k`` of ``A_{i,j}`` holds a nonzero."""

    owner: tuple[int, int]
    bits: Bitmap

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DirectoryVector):
            return NotImplemented
        return self.owner == other.owner and self.bits == other.bits


def build_directory_vector(part: CsrPartition, j: int) -> DirectoryVector:
    view = SubBlockView(part, j)
    width = view.col_hi - view.col_lo
    return DirectoryVector((part.rank, j), Bitmap.from_indices(width, view.occupied_columns()))


@dataclass(frozen=True)
class CrossDirectory:
    """Rank ``rank``'s row ``{V_{i,x}}`` plus copies of its column ``{V_{x,i}}``."""

    rank: int
    rows: tuple[DirectoryVector, ...]
    columns: tuple[DirectoryVector, ...]

    @property
    def p(self) -> int:
        return len(self.rows)

    def sieve_mask(self, j: int) -> DirectoryVector:
        """``V_{j,i}``: which of this rank's vertices rank ``j`` can consume."""
        return self.columns[j]


def init_cross_directory_rank(part: CsrPartition, fabric: Fabric) -> CrossDirectory:
    """Collective: build this rank's row vectors and swap them for column copies.

    The exchange is one all-to-all of raw bitmaps charged to the ``init``
    phase, outside any BFS level.
    """
    rows = tuple(build_directory_vector(part, j) for j in range(part.p))
    raw = codecs.RawCodec()
    received = fabric.alltoallv(
        part.rank, [codecs.encode(raw, v.bits) for v in rows], phase=INIT_PHASE
    )
    columns = []
    for x, msg in enumerate(received):
        if x == part.rank:
            columns.append(rows[x])
        else:
            columns.append(DirectoryVector((x, part.rank), codecs.decode(msg)))
    return CrossDirectory(part.rank, rows, tuple(columns))


def init_cross_directory(parts: Sequence[CsrPartition], fabric: Fabric) -> list[CrossDirectory]:
    if fabric.p != len(parts):
        raise ContractViolation(f"fabric has {fabric.p} ranks, got {len(parts)} partitions")
    return fabric.run(lambda rank: init_cross_directory_rank(parts[rank], fabric))


def sieve(f_i: Bitmap, v: DirectoryVector | Bitmap) -> Bitmap:
    """``f_{i,j} = f_i ⊙ V_{j,i}``."""
    mask = v.bits if isinstance(v, DirectoryVector) else v
    return f_i & mask


def sieve_encode(
    f_i: Bitmap, v: DirectoryVector | Bitmap, codec: Codec, *, elide_empty: bool = True
) -> bytes:
    """Sieve and compress in one pass over ``f_i``.

    Produces exactly ``encode(codec, sieve(f_i, v))`` without allocating the
    sieved bitmap.
    """
    mask = v.bits if isinstance(v, DirectoryVector) else v
    return codecs.encode_masked(codec, f_i, mask, elide_empty=elide_empty)


def sieve_encode_naive(
    f_i: Bitmap, v: DirectoryVector | Bitmap, codec: Codec, *, elide_empty: bool = True
) -> bytes:
    """Reference path: materialize the sieved copy, then compress it."""
    return codecs.encode(codec, sieve(f_i, v), elide_empty=elide_empty)
