"""Self-describing wire codecs for bitmaps.

Every message starts with a 9-byte header: one codec id byte followed by the
bitmap length as a little-endian u64.  The body depends on the codec:

====  ========  ==========================================================
id    name      body
====  ========  ==========================================================
0     raw       packed bitmap bytes, ``ceil(nbits/8)`` of them
1     wah       u8 W, u64 word count, words (``ceil(W/8)`` bytes each, LE),
                u8 active_len, active word (``ceil(W/8)`` bytes, LE)
2     sparse    u64 count, then ``count`` u64 set-bit positions ascending
3     rle       (u8 run length 1..255, u8 byte value) pairs over raw bytes
====  ========  ==========================================================

A message whose body is empty decodes to an all-zero bitmap regardless of
codec; senders use this to ship empty pieces with the header alone.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .bitmap import Bitmap, nbytes_for
from .errors import ConfigurationError, ContractViolation, DecodeError
from .wah import WahVector, check_word_width, encode_bytes, wah_decode, word_bytes

HEADER = struct.Struct("<BQ")
HEADER_SIZE = HEADER.size
_U64 = struct.Struct("<Q")

RAW_ID, WAH_ID, SPARSE_ID, RLE_ID = 0, 1, 2, 3


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray  # int64, strictly increasing
    nbits: int

    def __post_init__(self):
        idx = self.indices
        if idx.size and (idx[0] < 0 or idx[-1] >= self.nbits or np.any(np.diff(idx) <= 0)):
            raise ContractViolation("sparse indices must be strictly increasing and < nbits")

    def payload_size(self) -> int:
        return 8 * int(self.indices.size)


def sparse_encode(b: Bitmap) -> SparseVector:
    return SparseVector(b.indices(), b.nbits)


def sparse_decode(s: SparseVector) -> Bitmap:
    idx = np.asarray(s.indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= s.nbits):
        raise DecodeError(f"sparse index outside [0, {s.nbits})")
    return Bitmap.from_indices(s.nbits, idx)


class Codec:
    """Base class for a bitmap wire codec.

    Subclasses provide ``encode_body`` and ``decode_body``; the rest of the
    message framing is shared.  External compressors plug in by subclassing
    and calling :func:`register_codec` with an unused id.
    """

    codec_id: int = -1
    name: str = "?"

    def encode_body(self, b: Bitmap) -> bytes:
        raise NotImplementedError

    def decode_body(self, body: bytes, nbits: int) -> Bitmap:
        raise NotImplementedError

    def encode_masked_body(self, b: Bitmap, mask: Bitmap) -> bytes:
        return self.encode_body(b & mask)

    def body_size(self, b: Bitmap) -> int:
        return len(self.encode_body(b))

    def payload_size(self, b: Bitmap) -> int:
        """Body bytes that carry bitmap content, codec bookkeeping excluded."""
        return self.body_size(b)

    @property
    def spec(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"<codec {self.spec}>"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Codec) and self.spec == other.spec

    def __hash__(self) -> int:
        return hash(self.spec)


class RawCodec(Codec):
    codec_id = RAW_ID
    name = "raw"

    def encode_body(self, b):
        return b.data.tobytes()

    def decode_body(self, body, nbits):
        if len(body) != nbytes_for(nbits):
            raise DecodeError(f"raw body of {len(body)} bytes for {nbits} bits")
        data = np.frombuffer(body, dtype=np.uint8).copy()
        if nbits & 7 and data[-1] >> (nbits & 7):
            raise DecodeError("raw body has bits set past nbits")
        return Bitmap(nbits, data)

    def body_size(self, b):
        return nbytes_for(b.nbits)


class WahCodec(Codec):
    codec_id = WAH_ID
    name = "wah"

    def __init__(self, word_width: int = 64):
        check_word_width(word_width)
        self.word_width = word_width

    @property
    def spec(self):
        return f"wah:{self.word_width}"

    def _pack(self, v: WahVector) -> bytes:
        wb = word_bytes(v.word_width)
        words = v.words.astype("<u8").view(np.uint8).reshape(-1, 8)[:, :wb]
        return b"".join(
            (
                struct.pack("<BQ", v.word_width, v.words.size),
                words.tobytes(),
                struct.pack("<B", v.active_len),
                int(v.active).to_bytes(wb, "little"),
            )
        )

    def encode_body(self, b):
        return self._pack(encode_bytes(b.data, b.nbits, self.word_width))

    def encode_masked_body(self, b, mask):
        if b.nbits != mask.nbits:
            raise ContractViolation(f"bitmap length mismatch: {b.nbits} vs {mask.nbits}")
        return self._pack(encode_bytes(b.data, b.nbits, self.word_width, mask=mask.data))

    def unpack(self, body: bytes, nbits: int) -> WahVector:
        if len(body) < 9:
            raise DecodeError("truncated WAH body")
        W, count = struct.unpack_from("<BQ", body, 0)
        try:
            check_word_width(W)
        except ContractViolation as exc:
            raise DecodeError(str(exc)) from None
        wb = word_bytes(W)
        expected = 9 + count * wb + 1 + wb
        if len(body) != expected:
            raise DecodeError(f"WAH body is {len(body)} bytes, expected {expected}")
        raw = np.frombuffer(body, dtype=np.uint8, count=count * wb, offset=9)
        padded = np.zeros((count, 8), dtype=np.uint8)
        padded[:, :wb] = raw.reshape(count, wb)
        words = padded.view("<u8").ravel().astype(np.uint64)
        active_len = body[9 + count * wb]
        active = int.from_bytes(body[10 + count * wb :], "little")
        return WahVector(W, words, active_len, active, nbits)

    def decode_body(self, body, nbits):
        return wah_decode(self.unpack(body, nbits))

    def payload_size(self, b):
        v = encode_bytes(b.data, b.nbits, self.word_width)
        return (v.words.size + 1) * word_bytes(self.word_width)


class SparseCodec(Codec):
    codec_id = SPARSE_ID
    name = "sparse"

    def encode_body(self, b):
        idx = b.indices()
        return _U64.pack(idx.size) + idx.astype("<u8").tobytes()

    def encode_masked_body(self, b, mask):
        if b.nbits != mask.nbits:
            raise ContractViolation(f"bitmap length mismatch: {b.nbits} vs {mask.nbits}")
        return self.encode_body(Bitmap(b.nbits, b.data & mask.data))

    def decode_body(self, body, nbits):
        if len(body) < 8:
            raise DecodeError("truncated sparse body")
        (count,) = _U64.unpack_from(body, 0)
        if len(body) != 8 + 8 * count:
            raise DecodeError(f"sparse body is {len(body)} bytes for {count} indices")
        idx = np.frombuffer(body, dtype="<u8", count=count, offset=8).astype(np.int64)
        if count and (np.any(np.diff(idx) <= 0) or idx[-1] >= nbits or idx[0] < 0):
            raise DecodeError("sparse indices not strictly increasing within range")
        return Bitmap.from_indices(nbits, idx)

    def body_size(self, b):
        return 8 + 8 * b.popcount()

    def payload_size(self, b):
        return 8 * b.popcount()


class RleCodec(Codec):
    """Byte-level run-length coding of the raw packed bytes."""

    codec_id = RLE_ID
    name = "rle"

    def encode_body(self, b):
        data = b.data
        if data.size == 0:
            return b""
        starts = np.flatnonzero(np.concatenate(([True], data[1:] != data[:-1])))
        lengths = np.diff(np.append(starts, data.size))
        pieces = -(-lengths // 255)
        run = np.repeat(np.arange(starts.size), pieces)
        first = np.cumsum(pieces) - pieces
        pos = np.arange(run.size) - first[run]
        counts = np.minimum(lengths[run] - pos * 255, 255)
        out = np.empty((run.size, 2), dtype=np.uint8)
        out[:, 0] = counts
        out[:, 1] = data[starts[run]]
        return out.tobytes()

    def decode_body(self, body, nbits):
        if len(body) % 2:
            raise DecodeError("rle body has odd length")
        pairs = np.frombuffer(body, dtype=np.uint8).reshape(-1, 2)
        if np.any(pairs[:, 0] == 0):
            raise DecodeError("rle run of length zero")
        data = np.repeat(pairs[:, 1], pairs[:, 0].astype(np.int64))
        if data.size != nbytes_for(nbits):
            raise DecodeError(f"rle expands to {data.size} bytes for {nbits} bits")
        if nbits & 7 and data[-1] >> (nbits & 7):
            raise DecodeError("rle body has bits set past nbits")
        return Bitmap(nbits, data)


_REGISTRY: dict[int, Codec] = {}


def register_codec(codec: Codec) -> Codec:
    """Make ``codec`` decodable by id.  Later registrations win."""
    if not 0 <= codec.codec_id <= 255:
        raise ConfigurationError(f"codec id {codec.codec_id} does not fit in a byte")
    _REGISTRY[codec.codec_id] = codec
    return codec


for _c in (RawCodec(), WahCodec(64), SparseCodec(), RleCodec()):
    register_codec(_c)


def parse_codec(text: str) -> Codec:
    """Parse ``raw``, ``sparse``, ``rle`` or ``wah[:W]``."""
    name, _, arg = text.strip().lower().partition(":")
    if name == "wah":
        try:
            return WahCodec(int(arg) if arg else 64)
        except (ValueError, ContractViolation) as exc:
            raise ConfigurationError(f"bad WAH codec spec {text!r}: {exc}") from None
    if arg:
        raise ConfigurationError(f"codec {name!r} takes no parameter")
    for codec in _REGISTRY.values():
        if codec.name == name:
            return codec
    raise ConfigurationError(f"unknown codec {text!r}")


def encode(codec: Codec, b: Bitmap, *, elide_empty: bool = False) -> bytes:
    if elide_empty and not b.any():
        return HEADER.pack(codec.codec_id, b.nbits)
    return HEADER.pack(codec.codec_id, b.nbits) + codec.encode_body(b)


def encode_masked(codec: Codec, b: Bitmap, mask: Bitmap, *, elide_empty: bool = False) -> bytes:
    """``encode(codec, b & mask)`` without materializing the AND."""
    if b.nbits != mask.nbits:
        raise ContractViolation(f"bitmap length mismatch: {b.nbits} vs {mask.nbits}")
    if elide_empty and not np.any(b.data & mask.data):
        return HEADER.pack(codec.codec_id, b.nbits)
    return HEADER.pack(codec.codec_id, b.nbits) + codec.encode_masked_body(b, mask)


def decode(message: bytes) -> Bitmap:
    if len(message) < HEADER_SIZE:
        raise DecodeError(f"message of {len(message)} bytes is shorter than the header")
    codec_id, nbits = HEADER.unpack_from(message, 0)
    body = bytes(message[HEADER_SIZE:])
    if not body:
        return Bitmap(nbits)
    codec = _REGISTRY.get(codec_id)
    if codec is None:
        raise DecodeError(f"unknown codec id {codec_id}")
    return codec.decode_body(body, nbits)


def encoded_size(codec: Codec, b: Bitmap) -> int:
    """Exact length of ``encode(codec, b)``, header included."""
    return HEADER_SIZE + codec.body_size(b)


def payload_size(codec: Codec, b: Bitmap) -> int:
    """Content bytes alone, the figure quoted when comparing representations."""
    return codec.payload_size(b)
