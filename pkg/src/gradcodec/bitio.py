"""Bit-exact serialization primitives shared by all codecs.

Bit order: append order is transmission order, fixed-width fields are
written most-significant-bit first.  A BitString tracks its exact bit
length (no implicit byte padding); byte-level padding happens only in
the message container.
"""

import math
import struct

import numpy as np


class DecodeError(Exception):
    """Payload cannot be decoded."""


class TruncatedStreamError(DecodeError):
    """Decoder ran past the end of the stream."""


class MalformedCodeError(DecodeError):
    """A well-delimited code decoded to an out-of-domain value."""


class BitString:
    """Immutable-by-convention sequence of bits with exact length."""

    __slots__ = ("_arr",)

    def __init__(self, bits=()):
        arr = np.array(bits, dtype=np.uint8).reshape(-1)
        if arr.size and arr.max(initial=0) > 1:
            raise ValueError("bits must be 0 or 1")
        self._arr = arr

    @classmethod
    def _wrap(cls, arr):
        bs = cls.__new__(cls)
        bs._arr = arr
        return bs

    @classmethod
    def from_int(cls, value, width):
        """Value as exactly `width` bits, most-significant first."""
        if width < 0:
            raise ValueError("width must be >= 0")
        if value < 0:
            raise ValueError("value must be >= 0")
        if value >> width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        if width == 0:
            return cls._wrap(np.empty(0, dtype=np.uint8))
        raw = value.to_bytes((width + 7) // 8, "big")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        return cls._wrap(bits[-width:].copy())

    @classmethod
    def from_bytes(cls, data, length):
        """First `length` bits of `data` (MSB-first within each byte)."""
        if length < 0 or length > 8 * len(data):
            raise ValueError("bit length out of range for buffer")
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=length)
        return cls._wrap(bits)

    @staticmethod
    def concat(parts):
        arrs = [p._arr for p in parts]
        if not arrs:
            return BitString._wrap(np.empty(0, dtype=np.uint8))
        return BitString._wrap(np.concatenate(arrs))

    def to_int(self):
        """Interpret the whole string as one MSB-first integer."""
        n = self._arr.size
        if n == 0:
            return 0
        pad = (-n) % 8
        padded = np.concatenate([np.zeros(pad, dtype=np.uint8), self._arr])
        return int.from_bytes(np.packbits(padded).tobytes(), "big")

    def to_bytes(self):
        """Pack to bytes, zero-padded at the end to a byte boundary."""
        return np.packbits(self._arr).tobytes()

    def to01(self):
        return "".join("1" if b else "0" for b in self._arr)

    def __add__(self, other):
        return BitString._wrap(np.concatenate([self._arr, other._arr]))

    def __len__(self):
        return int(self._arr.size)

    def __getitem__(self, i):
        return int(self._arr[i])

    def __eq__(self, other):
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self._arr, other._arr)

    def __hash__(self):
        return hash(self.to_bytes() + len(self).to_bytes(8, "big"))

    def __repr__(self):
        s = self.to01()
        if len(s) > 64:
            s = s[:61] + "..."
        return f"BitString({len(self)} bits: {s})"


class BitCursor:
    """Single-consumer read position over a BitString."""

    __slots__ = ("_arr", "pos")

    def __init__(self, source: BitString):
        self._arr = source._arr
        self.pos = 0

    def remaining(self):
        return int(self._arr.size) - self.pos

    def _take(self, n):
        if n > self.remaining():
            raise TruncatedStreamError(
                f"need {n} bits at offset {self.pos}, {self.remaining()} left"
            )
        out = self._arr[self.pos:self.pos + n]
        self.pos += n
        return out

    def read_bit(self):
        return int(self._take(1)[0])

    def read_bits(self, width):
        """Read a `width`-bit MSB-first unsigned integer."""
        if width < 0:
            raise ValueError("width must be >= 0")
        if width == 0:
            return 0
        chunk = self._take(width)
        pad = (-width) % 8
        padded = np.concatenate([np.zeros(pad, dtype=np.uint8), chunk])
        return int.from_bytes(np.packbits(padded).tobytes(), "big")


def write_unary(k) -> BitString:
    """Unary code for k >= 1: (k-1) ones followed by one zero."""
    if k < 1:
        raise ValueError("unary code is defined for k >= 1")
    arr = np.ones(k, dtype=np.uint8)
    arr[-1] = 0
    return BitString._wrap(arr)


def read_unary(cursor: BitCursor):
    """Inverse of write_unary; consumes exactly the returned value's bits."""
    rel = np.flatnonzero(cursor._arr[cursor.pos:] == 0)
    if rel.size == 0:
        raise TruncatedStreamError(
            f"unary code not terminated (offset {cursor.pos})"
        )
    k = int(rel[0]) + 1
    cursor.pos += k
    return k


def write_unary_block(values) -> BitString:
    """Concatenated unary codes for an array of values >= 1."""
    values = np.asarray(values, dtype=np.int64)
    if values.size == 0:
        return BitString()
    if values.min() < 1:
        raise ValueError("unary code is defined for k >= 1")
    total = int(values.sum())
    arr = np.ones(total, dtype=np.uint8)
    arr[np.cumsum(values) - 1] = 0
    return BitString._wrap(arr)


def read_unary_block(cursor: BitCursor, count):
    """Read `count` consecutive unary codes as an int64 array."""
    if count == 0:
        return np.empty(0, dtype=np.int64)
    rel = np.flatnonzero(cursor._arr[cursor.pos:] == 0)
    if rel.size < count:
        raise TruncatedStreamError(
            f"expected {count} unary codes at offset {cursor.pos}, found {rel.size}"
        )
    ends = rel[:count].astype(np.int64)
    values = np.diff(np.concatenate([[-1], ends]))
    cursor.pos += int(ends[-1]) + 1
    return values


def write_fixed(value, width) -> BitString:
    """Fixed-width unsigned integer, MSB first."""
    return BitString.from_int(value, width)


def read_fixed(cursor: BitCursor, width):
    return cursor.read_bits(width)


def golomb_rice_params(p):
    """Rice parameter m for success probability p, from 1/(2p) <= 2^m < 1/p.

    The interval spans exactly one factor of two, so m is unique.
    """
    if not (0.0 < p < 0.5):
        raise ValueError(f"p must be in (0, 1/2), got {p}")
    m = max(0, math.ceil(math.log2(1.0 / (2.0 * p))))
    while (2.0 ** m) * (2.0 * p) < 1.0:
        m += 1
    while m > 0 and (2.0 ** (m - 1)) * (2.0 * p) >= 1.0:
        m -= 1
    if not (2.0 ** m) * p < 1.0:
        raise ValueError(f"no Rice parameter satisfies the bracket for p={p}")
    return m


def golomb_rice_encode(value, m) -> BitString:
    """Golomb-Rice code: q zeros, a one, then the m-bit remainder.

    value = 2^m * q + r with 0 <= r < 2^m; total length q + 1 + m.
    """
    if value < 1:
        raise ValueError("Golomb-Rice input must be >= 1")
    if m < 0:
        raise ValueError("m must be >= 0")
    q = value >> m
    r = value & ((1 << m) - 1)
    arr = np.zeros(q + 1 + m, dtype=np.uint8)
    arr[q] = 1
    if m:
        arr[q + 1:] = BitString.from_int(r, m)._arr
    return BitString._wrap(arr)


def golomb_rice_decode(cursor: BitCursor, m):
    if m < 0:
        raise ValueError("m must be >= 0")
    rel = np.flatnonzero(cursor._arr[cursor.pos:] == 1)
    if rel.size == 0:
        raise TruncatedStreamError(
            f"Golomb-Rice quotient not terminated (offset {cursor.pos})"
        )
    q = int(rel[0])
    cursor.pos += q + 1
    r = cursor.read_bits(m)
    value = (q << m) | r
    if value < 1:
        raise MalformedCodeError(
            f"Golomb-Rice code decoded to {value} at offset {cursor.pos}"
        )
    return value


def subset_code_width(d, n0):
    """Bits needed for a subset rank: ceil(log2 C(d, n0))."""
    return (math.comb(d, n0) - 1).bit_length()


def subset_rank(positions, d, n0):
    """Lexicographic rank of an n0-subset of {0..d-1}.

    Combinatorial number system: subsets are ordered as sorted index
    tuples; {0,..,n0-1} has rank 0.  The scan keeps a running binomial
    coefficient, so the cost is O(d) big-integer multiply/divides.
    """
    positions = list(positions)
    if len(positions) != n0:
        raise ValueError(f"expected {n0} positions, got {len(positions)}")
    if n0 == 0:
        return 0
    prev = -1
    for p in positions:
        if p <= prev:
            raise ValueError("positions must be strictly increasing")
        prev = p
    if positions[0] < 0 or positions[-1] >= d:
        raise ValueError("positions out of range")

    rank = 0
    k = n0
    c = math.comb(d - 1, n0 - 1)  # subsets whose next chosen index is j
    it = iter(positions)
    nxt = next(it)
    for j in range(d):
        t = d - 1 - j
        if j == nxt:
            k -= 1
            if k == 0:
                break
            c = c * k // t
            nxt = next(it)
        else:
            rank += c
            c = c * (t - k + 1) // t
    return rank


def subset_unrank(rank, d, n0):
    """Inverse of subset_rank; returns the sorted position list."""
    if rank < 0 or rank >= math.comb(d, n0):
        raise ValueError(f"rank {rank} out of range for C({d},{n0})")
    if n0 == 0:
        return []
    positions = []
    k = n0
    c = math.comb(d - 1, n0 - 1)
    for j in range(d):
        t = d - 1 - j
        if rank < c:
            positions.append(j)
            k -= 1
            if k == 0:
                break
            c = c * k // t
        else:
            rank -= c
            c = c * (t - k + 1) // t
    return positions


def write_float_magnitude(value) -> BitString:
    """Nonnegative float as IEEE binary32 with the sign bit dropped (31 bits)."""
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"magnitude must be finite and >= 0, got {value}")
    try:
        raw = struct.pack(">f", value)
    except OverflowError as exc:
        raise ValueError(f"magnitude {value} overflows binary32") from exc
    word = int.from_bytes(raw, "big")
    return BitString.from_int(word & 0x7FFFFFFF, 31)


def read_float_magnitude(cursor: BitCursor):
    word = cursor.read_bits(31)
    return struct.unpack(">f", word.to_bytes(4, "big"))[0]


def write_float32(value) -> BitString:
    """Full signed IEEE binary32, 32 bits."""
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"value must be finite, got {value}")
    try:
        raw = struct.pack(">f", value)
    except OverflowError as exc:
        raise ValueError(f"value {value} overflows binary32") from exc
    return BitString.from_int(int.from_bytes(raw, "big"), 32)


def read_float32(cursor: BitCursor):
    word = cursor.read_bits(32)
    return struct.unpack(">f", word.to_bytes(4, "big"))[0]


def write_float32_block(values) -> BitString:
    """Concatenated binary32 fields for a float array."""
    values = np.asarray(values, dtype=np.float64)
    if values.size and not np.isfinite(values).all():
        raise ValueError("values must be finite")
    raw = values.astype(">f4").tobytes()
    return BitString.from_bytes(raw, 32 * values.size)


def read_float32_block(cursor: BitCursor, count):
    chunk = cursor._take(32 * count)
    raw = np.packbits(chunk).tobytes()
    return np.frombuffer(raw, dtype=">f4").astype(np.float64)


# --- message container -------------------------------------------------

CONTAINER_MAGIC = b"GCV1"
_HEADER_LEN = 4 + 1 + 4 + 4


def pack_container(tag, d, payload: BitString) -> bytes:
    """GCV1 container: magic, tag byte, LE32 dimension, LE32 bit length, payload."""
    if not 0 <= tag <= 255:
        raise ValueError("operator tag must fit in one byte")
    header = (
        CONTAINER_MAGIC
        + bytes([tag])
        + int(d).to_bytes(4, "little")
        + len(payload).to_bytes(4, "little")
    )
    return header + payload.to_bytes()


def unpack_container(blob: bytes):
    """Parse a GCV1 container; returns (tag, d, payload)."""
    if len(blob) < _HEADER_LEN:
        raise DecodeError(f"container too short ({len(blob)} bytes)")
    if blob[:4] != CONTAINER_MAGIC:
        raise DecodeError(f"bad magic {blob[:4]!r}, expected {CONTAINER_MAGIC!r}")
    tag = blob[4]
    d = int.from_bytes(blob[5:9], "little")
    nbits = int.from_bytes(blob[9:13], "little")
    body = blob[_HEADER_LEN:]
    if nbits > 8 * len(body):
        raise DecodeError(
            f"declared {nbits} payload bits but only {8 * len(body)} available"
        )
    return tag, d, BitString.from_bytes(body, nbits)
