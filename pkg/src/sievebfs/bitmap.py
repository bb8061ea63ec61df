"""Fixed-length bitmaps over vertex ids.

Storage is the serialized form itself: a ``uint8`` array of ``ceil(nbits/8)``
bytes where bit ``k`` lives in bit ``k % 8`` of byte ``k // 8``.  Padding bits
past ``nbits`` are always zero.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation


def nbytes_for(nbits: int) -> int:
    return (nbits + 7) >> 3


class Bitmap:
    __slots__ = ("nbits", "data")

    def __init__(self, nbits: int, data: np.ndarray | None = None):
        if nbits < 0:
            raise ContractViolation(f"negative bitmap length {nbits}")
        self.nbits = int(nbits)
        if data is None:
            self.data = np.zeros(nbytes_for(nbits), dtype=np.uint8)
        else:
            data = np.asarray(data, dtype=np.uint8)
            if data.shape != (nbytes_for(nbits),):
                raise ContractViolation(
                    f"storage of {data.size} bytes does not fit {nbits} bits"
                )
            self.data = data
            self._clear_padding()

    # construction -----------------------------------------------------

    @classmethod
    def zeros(cls, nbits: int) -> "Bitmap":
        return cls(nbits)

    @classmethod
    def ones(cls, nbits: int) -> "Bitmap":
        b = cls(nbits, np.full(nbytes_for(nbits), 0xFF, dtype=np.uint8))
        return b

    @classmethod
    def from_bools(cls, bits: Sequence[bool] | np.ndarray) -> "Bitmap":
        arr = np.asarray(bits, dtype=bool)
        return cls(arr.size, np.packbits(arr, bitorder="little"))

    @classmethod
    def from_indices(cls, nbits: int, indices: Iterable[int] | np.ndarray) -> "Bitmap":
        idx = np.asarray(
            indices if isinstance(indices, np.ndarray) else list(indices), dtype=np.int64
        )
        b = cls(nbits)
        if idx.size:
            if idx.min() < 0 or idx.max() >= nbits:
                raise ContractViolation(f"index out of range for {nbits}-bit bitmap")
            np.bitwise_or.at(b.data, idx >> 3, (1 << (idx & 7)).astype(np.uint8))
        return b

    @classmethod
    def from_string(cls, text: str) -> "Bitmap":
        """Parse a string such as ``"00110100"``; character ``k`` is bit ``k``."""
        return cls.from_bools([c == "1" for c in text if c in "01"])

    @classmethod
    def concat(cls, pieces: Sequence["Bitmap"]) -> "Bitmap":
        if all(p.nbits % 8 == 0 for p in pieces[:-1]):
            data = np.concatenate([p.data for p in pieces]) if pieces else np.zeros(0, np.uint8)
            return cls(sum(p.nbits for p in pieces), data)
        return cls.from_bools(np.concatenate([p.to_bools() for p in pieces]))

    def copy(self) -> "Bitmap":
        return Bitmap(self.nbits, self.data.copy())

    def _clear_padding(self) -> None:
        tail = self.nbits & 7
        if tail:
            self.data[-1] &= (1 << tail) - 1

    # element access ---------------------------------------------------

    def _check_index(self, k: int) -> None:
        if not 0 <= k < self.nbits:
            raise ContractViolation(f"bit {k} outside [0, {self.nbits})")

    def get_bit(self, k: int) -> bool:
        self._check_index(k)
        return bool((self.data[k >> 3] >> (k & 7)) & 1)

    def set_bit(self, k: int, value: bool = True) -> "Bitmap":
        self._check_index(k)
        if value:
            self.data[k >> 3] |= np.uint8(1 << (k & 7))
        else:
            self.data[k >> 3] &= np.uint8(~(1 << (k & 7)) & 0xFF)
        return self

    def to_bools(self) -> np.ndarray:
        return np.unpackbits(self.data, count=self.nbits, bitorder="little").view(bool)

    def indices(self) -> np.ndarray:
        """Positions of set bits, ascending, as int64."""
        nz = np.flatnonzero(self.data)
        if nz.size == 0:
            return np.zeros(0, dtype=np.int64)
        bits = np.unpackbits(self.data[nz], bitorder="little").reshape(-1, 8)
        rows, cols = np.nonzero(bits)
        return nz[rows].astype(np.int64) * 8 + cols

    def popcount(self) -> int:
        return int(np.bitwise_count(self.data).sum(dtype=np.int64))

    def any(self) -> bool:
        return bool(self.data.any())

    def slice(self, lo: int, hi: int) -> "Bitmap":
        if not 0 <= lo <= hi <= self.nbits:
            raise ContractViolation(f"slice [{lo}, {hi}) outside [0, {self.nbits})")
        if lo & 7 == 0:
            return Bitmap(hi - lo, self.data[lo >> 3 : nbytes_for(hi)].copy())
        return Bitmap.from_bools(self.to_bools()[lo:hi])

    # boolean algebra --------------------------------------------------

    def _check_same(self, other: "Bitmap") -> None:
        if self.nbits != other.nbits:
            raise ContractViolation(
                f"bitmap length mismatch: {self.nbits} vs {other.nbits}"
            )

    def or_assign(self, src: "Bitmap") -> "Bitmap":
        self._check_same(src)
        np.bitwise_or(self.data, src.data, out=self.data)
        return self

    def __or__(self, other: "Bitmap") -> "Bitmap":
        self._check_same(other)
        return Bitmap(self.nbits, self.data | other.data)

    def __and__(self, other: "Bitmap") -> "Bitmap":
        self._check_same(other)
        return Bitmap(self.nbits, self.data & other.data)

    def and_not(self, mask: "Bitmap") -> "Bitmap":
        self._check_same(mask)
        return Bitmap(self.nbits, self.data & ~mask.data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Bitmap):
            return NotImplemented
        return self.nbits == other.nbits and np.array_equal(self.data, other.data)

    def __len__(self) -> int:
        return self.nbits

    def __repr__(self) -> str:
        if self.nbits <= 64:
            return f"Bitmap('{''.join('1' if b else '0' for b in self.to_bools())}')"
        return f"Bitmap(nbits={self.nbits}, popcount={self.popcount()})"

    __hash__ = None  # mutable


def bit_or_assign(dst: Bitmap, src: Bitmap) -> Bitmap:
    return dst.or_assign(src)


def bit_and(a: Bitmap, b: Bitmap) -> Bitmap:
    return a & b


def bit_and_not(a: Bitmap, mask: Bitmap) -> Bitmap:
    return a.and_not(mask)


def popcount(a: Bitmap) -> int:
    return a.popcount()


def set_bit(a: Bitmap, k: int) -> Bitmap:
    return a.set_bit(k)


def get_bit(a: Bitmap, k: int) -> bool:
    return a.get_bit(k)
