"""Word-aligned hybrid (WAH) bitmap compression.

A ``W``-bit code word is either

* a literal: top bit 0, the low ``W-1`` bits hold one group of ``W-1`` bitmap
  bits, first bitmap bit in the most significant payload position; or
* a fill: top bit 1, next bit is the fill value, low ``W-2`` bits count how
  many consecutive all-0 or all-1 groups the word stands for.

Bits that do not make up a whole group sit in a trailing active word
(``active``, ``active_len``), again first bit most significant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitmap import Bitmap, nbytes_for
from .errors import ContractViolation, DecodeError

MIN_WORD_WIDTH = 4
MAX_WORD_WIDTH = 64

# Groups per encoding chunk; a multiple of 8 so every chunk starts on a byte.
_CHUNK_GROUPS = 1 << 15

_ZERO, _ONE, _LITERAL = 0, 1, 2


@dataclass(frozen=True)
class WahVector:
    word_width: int
    words: np.ndarray  # uint64, one code word per element
    active_len: int
    active: int
    nbits: int

    @property
    def group_bits(self) -> int:
        return self.word_width - 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WahVector):
            return NotImplemented
        return (
            self.word_width == other.word_width
            and self.active_len == other.active_len
            and self.active == other.active
            and self.nbits == other.nbits
            and np.array_equal(self.words, other.words)
        )

    def describe(self) -> list[str]:
        """Human-readable word listing, handy in test failure output."""
        W = self.word_width
        out = []
        for w in self.words.tolist():
            if w >> (W - 1):
                out.append(f"fill({(w >> (W - 2)) & 1},count={w & ((1 << (W - 2)) - 1)})")
            else:
                out.append(f"literal({w:0{W - 1}b})")
        bits = f"{self.active:0{self.active_len}b}" if self.active_len else ""
        out.append(f"active('{bits}',len={self.active_len})")
        return out


def check_word_width(W: int) -> None:
    if not MIN_WORD_WIDTH <= W <= MAX_WORD_WIDTH:
        raise ContractViolation(
            f"WAH word width {W} outside [{MIN_WORD_WIDTH}, {MAX_WORD_WIDTH}]"
        )


def _msb_weights(G: int) -> np.ndarray:
    return np.left_shift(np.uint64(1), np.arange(G - 1, -1, -1, dtype=np.uint64))


def _group_values(
    data: np.ndarray, mask: np.ndarray | None, nbits: int, G: int
) -> np.ndarray:
    """Literal payload of every whole group, computed chunk by chunk.

    When ``mask`` is given the groups are taken from ``data & mask`` without
    materializing the masked bitmap.
    """
    ngroups = nbits // G
    values = np.empty(ngroups, dtype=np.uint64)
    weights = _msb_weights(G)
    for g0 in range(0, ngroups, _CHUNK_GROUPS):
        g1 = min(g0 + _CHUNK_GROUPS, ngroups)
        b0 = (g0 * G) >> 3  # exact, g0 is a multiple of 8
        b1 = nbytes_for(g1 * G)
        chunk = data[b0:b1]
        if mask is not None:
            chunk = chunk & mask[b0:b1]
        bits = np.unpackbits(chunk, count=(g1 - g0) * G, bitorder="little")
        bits = bits.reshape(g1 - g0, G).astype(np.uint64)
        values[g0:g1] = bits @ weights
    return values


def _active_value(data: np.ndarray, mask: np.ndarray | None, nbits: int, G: int) -> tuple[int, int]:
    active_len = nbits % G
    if active_len == 0:
        return 0, 0
    start = nbits - active_len
    b0 = start >> 3
    chunk = data[b0:]
    if mask is not None:
        chunk = chunk & mask[b0:]
    bits = np.unpackbits(chunk, bitorder="little")[start - b0 * 8 : start - b0 * 8 + active_len]
    value = 0
    for b in bits.tolist():
        value = (value << 1) | b
    return active_len, value


def _words_from_groups(values: np.ndarray, W: int) -> np.ndarray:
    G = W - 1
    ngroups = values.size
    if ngroups == 0:
        return np.zeros(0, dtype=np.uint64)
    full = np.uint64((1 << G) - 1)
    kinds = np.full(ngroups, _LITERAL, dtype=np.int8)
    kinds[values == 0] = _ZERO
    kinds[values == full] = _ONE

    starts_mask = np.empty(ngroups, dtype=bool)
    starts_mask[0] = True
    starts_mask[1:] = (kinds[1:] != kinds[:-1]) | (kinds[1:] == _LITERAL)
    starts = np.flatnonzero(starts_mask)
    lengths = np.diff(np.append(starts, ngroups))
    run_kinds = kinds[starts]

    max_count = (1 << (W - 2)) - 1
    is_fill = run_kinds != _LITERAL
    words_per_run = np.where(is_fill, -(-lengths // max_count), 1)
    total = int(words_per_run.sum())

    run_of_word = np.repeat(np.arange(starts.size), words_per_run)
    first_word = np.cumsum(words_per_run) - words_per_run
    pos = np.arange(total) - first_word[run_of_word]
    last = pos == words_per_run[run_of_word] - 1
    counts = np.where(last, lengths[run_of_word] - pos * max_count, max_count).astype(np.uint64)

    fill_words = (
        np.uint64(1 << (W - 1))
        | (run_kinds[run_of_word].astype(np.uint64) << np.uint64(W - 2))
        | counts
    )
    literal_words = values[starts[run_of_word]]
    return np.where(is_fill[run_of_word], fill_words, literal_words).astype(np.uint64)


def encode_bytes(
    data: np.ndarray, nbits: int, W: int = 64, mask: np.ndarray | None = None
) -> WahVector:
    check_word_width(W)
    G = W - 1
    values = _group_values(data, mask, nbits, G)
    active_len, active = _active_value(data, mask, nbits, G)
    return WahVector(W, _words_from_groups(values, W), active_len, active, nbits)


def wah_encode(b: Bitmap, W: int = 64) -> WahVector:
    return encode_bytes(b.data, b.nbits, W)


def wah_encode_masked(b: Bitmap, mask: Bitmap, W: int = 64) -> WahVector:
    """Encode ``b & mask`` in one pass, never building the AND as a bitmap."""
    if b.nbits != mask.nbits:
        raise ContractViolation(f"bitmap length mismatch: {b.nbits} vs {mask.nbits}")
    return encode_bytes(b.data, b.nbits, W, mask=mask.data)


def wah_decode(v: WahVector) -> Bitmap:
    W = v.word_width
    check_word_width(W)
    G = W - 1
    words = np.asarray(v.words, dtype=np.uint64)
    if words.size and int(words.max()) >> W:
        raise DecodeError(f"code word wider than {W} bits")
    if not 0 <= v.active_len <= G:
        raise DecodeError(f"active length {v.active_len} outside [0, {G}]")
    if v.active < 0 or v.active >> v.active_len:
        raise DecodeError("active payload has bits beyond active_len")

    is_fill = (words >> np.uint64(W - 1)) & np.uint64(1) == 1
    fill_value = (words >> np.uint64(W - 2)) & np.uint64(1)
    counts = words & np.uint64((1 << (W - 2)) - 1)
    if np.any(is_fill & (counts == 0)):
        raise DecodeError("fill word with zero group count")
    reps = np.where(is_fill, counts, 1).astype(np.int64)
    ngroups = int(reps.sum())
    if ngroups * G + v.active_len != v.nbits:
        raise DecodeError(
            f"word stream covers {ngroups * G + v.active_len} bits, expected {v.nbits}"
        )

    full = np.uint64((1 << G) - 1)
    group_vals = np.where(is_fill, np.where(fill_value == 1, full, np.uint64(0)), words)
    groups = np.repeat(group_vals.astype(np.uint64), reps)
    shifts = np.arange(G - 1, -1, -1, dtype=np.uint64)
    bits = ((groups[:, None] >> shifts) & np.uint64(1)).astype(bool).ravel()
    if v.active_len:
        tail = [(v.active >> (v.active_len - 1 - k)) & 1 for k in range(v.active_len)]
        bits = np.concatenate([bits, np.array(tail, dtype=bool)])
    return Bitmap.from_bools(bits)


def word_bytes(W: int) -> int:
    return (W + 7) >> 3
