"""Bit containers, counter-based randomness, and the example-stream file format.

Everything downstream samples through `rng_word`: a pure function from a
(master_seed, stream_id, index) triple to a 64-bit word.  Samplers address
disjoint index ranges instead of sharing mutable generator state, so the same
triple always produces the same word, chunked and parallel runs produce
byte-identical output, and any example can be regenerated in isolation.

Streams of labeled examples are stored in a small binary format (magic
``GLHS``).  Features are bit matrices flattened row-major and packed eight
bits per byte, least significant bit first.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

MASK64 = (1 << 64) - 1

# SplitMix64 finalizer constants plus two xxhash-style odd offsets used to
# fold the stream id and index into the chain.
_C_SEED = 0x9E3779B97F4A7C15
_C_STREAM = 0xC2B2AE3D27D4EB4F
_C_INDEX = 0x165667B19E3779F9
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

STREAM_FORMAT_VERSION = 1

# Purpose tags appended to user stream ids (see `purpose_stream`).
PURPOSE_LABEL = 0
PURPOSE_EDGE = 1
PURPOSE_X = 2
PURPOSE_NOISE = 3
PURPOSE_DECODE = 4
PURPOSE_LEARN = 5
PURPOSE_MC = 6
PURPOSE_AUX = 7

_MAX_USER_STREAM = 1 << 61


class GuardError(ValueError):
    """Raised when an exhaustive computation would exceed its size guard."""


class FormatError(ValueError):
    """Raised for malformed stream headers or records."""


class CorruptionError(FormatError):
    """Raised when a stream body does not match its header."""


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _M1) & MASK64
    x = ((x ^ (x >> 27)) * _M2) & MASK64
    return x ^ (x >> 31)


def _mix64_array(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_M1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_M2)
    x ^= x >> np.uint64(31)
    return x


@dataclass(frozen=True)
class SeedSpec:
    """Address of one random word: (master_seed, stream_id, index)."""

    master_seed: int
    stream_id: int
    index: int


def _stream_base(master_seed: int, stream_id: int) -> int:
    w = mix64((master_seed + _C_SEED) & MASK64)
    return mix64(((w ^ (stream_id & MASK64)) + _C_STREAM) & MASK64)


def rng_word(spec: SeedSpec) -> int:
    """Pure 64-bit word for the given seed triple.

    Integer-only arithmetic, so identical triples yield identical words on
    every platform and in every process.
    """
    base = _stream_base(spec.master_seed, spec.stream_id)
    return mix64(((base ^ (spec.index & MASK64)) + _C_INDEX) & MASK64)


def rng_words(master_seed: int, stream_id: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized `rng_word` over an array of indices (returns uint64)."""
    base = _stream_base(master_seed, stream_id)
    idx = np.asarray(indices).astype(np.uint64, copy=False)
    return _mix64_array((np.uint64(base) ^ idx) + np.uint64(_C_INDEX))


def words_to_uniforms(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to float64 uniforms in [0, 1) using the top 53 bits."""
    return (words >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def words_to_open_uniforms(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to float64 uniforms in (0, 1]."""
    return ((words >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)


def purpose_stream(stream_id: int, purpose: int) -> int:
    """Derive a sub-stream id for one sampling purpose.

    User stream ids live in 61 bits; the low 3 bits carry the purpose tag, so
    label words, example words, noise words and decoder words never collide.
    """
    if not 0 <= stream_id < _MAX_USER_STREAM:
        raise ValueError(f"stream_id must be in [0, 2^61), got {stream_id}")
    if not 0 <= purpose < 8:
        raise ValueError(f"purpose must be in [0, 8), got {purpose}")
    return (stream_id << 3) | purpose


class CursorRng:
    """Sequential reader over one stream of counter-addressed words.

    A thin stateful cursor for scalar sampling needs (instance generation,
    decoder draws).  Concurrent users should own disjoint streams; the cursor
    itself is cheap and deterministic.
    """

    def __init__(self, master_seed: int, stream_id: int, index: int = 0):
        self.master_seed = master_seed
        self.stream_id = stream_id
        self.index = index
        self._base = _stream_base(master_seed, stream_id)

    def word(self) -> int:
        w = mix64(((self._base ^ (self.index & MASK64)) + _C_INDEX) & MASK64)
        self.index += 1
        return w

    def words(self, count: int) -> np.ndarray:
        idx = np.arange(self.index, self.index + count, dtype=np.uint64)
        self.index += count
        return _mix64_array((np.uint64(self._base) ^ idx) + np.uint64(_C_INDEX))

    def uniform(self) -> float:
        return (self.word() >> 11) * (2.0 ** -53)

    def uniforms(self, count: int) -> np.ndarray:
        return words_to_uniforms(self.words(count))

    def bernoulli(self, p: float) -> int:
        return 1 if self.uniform() < p else 0

    def randint(self, n: int) -> int:
        """Uniform draw from range(n).  Bias is below n/2^53, negligible here."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        v = int(self.uniform() * n)
        return min(v, n - 1)

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle, in place; also returns the list."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def sample_without_replacement(self, n: int, m: int) -> list[int]:
        """m distinct values from range(n), order random."""
        if m > n:
            raise ValueError(f"cannot draw {m} distinct values from range({n})")
        picked: dict[int, int] = {}
        out = []
        for i in range(m):
            j = i + self.randint(n - i)
            vi = picked.get(i, i)
            vj = picked.get(j, j)
            out.append(vj)
            picked[j] = vi
        return out


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    return np.packbits(bits.astype(np.uint8, copy=False), bitorder="little")


def _unpack_bits(packed: np.ndarray, length: int) -> np.ndarray:
    return np.unpackbits(packed, count=length, bitorder="little")


class BitVector:
    """Immutable packed bit sequence."""

    __slots__ = ("_packed", "_length")

    def __init__(self, bits: Iterable[int] | np.ndarray):
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
        if arr.ndim != 1:
            raise ValueError("BitVector needs a one-dimensional bit sequence")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("BitVector entries must be 0 or 1")
        self._length = int(arr.size)
        packed = _pack_bits(arr)
        packed.flags.writeable = False
        self._packed = packed

    @classmethod
    def zeros(cls, n: int) -> "BitVector":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def _from_packed(cls, packed: np.ndarray, length: int) -> "BitVector":
        obj = cls.__new__(cls)
        packed = np.asarray(packed, dtype=np.uint8)
        if packed.size != (length + 7) // 8:
            raise ValueError("packed length does not match bit length")
        packed = packed.copy()
        # mask padding bits so equality is content-only
        if length % 8 and packed.size:
            packed[-1] &= (1 << (length % 8)) - 1
        packed.flags.writeable = False
        obj._packed = packed
        obj._length = length
        return obj

    def to_array(self) -> np.ndarray:
        return _unpack_bits(self._packed, self._length)

    def packed_bytes(self) -> bytes:
        return self._packed.tobytes()

    def popcount(self) -> int:
        return int(self.to_array().sum())

    def __len__(self) -> int:
        return self._length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self._length:
            raise IndexError(f"bit index {i} out of range [0, {self._length})")
        return (int(self._packed[i >> 3]) >> (i & 7)) & 1

    def __iter__(self) -> Iterator[int]:
        return iter(self.to_array().tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._length == other._length and bool(
            np.array_equal(self._packed, other._packed)
        )

    def __hash__(self) -> int:
        return hash((self._length, self._packed.tobytes()))

    def __repr__(self) -> str:
        if self._length <= 64:
            body = "".join(str(b) for b in self.to_array())
        else:
            body = f"<{self._length} bits>"
        return f"BitVector({body})"


class BitMatrix:
    """Immutable bit matrix stored row-major over a BitVector.

    Row and column views index the same underlying bit: entry (i, j) lives at
    flat position i * cols + j.
    """

    __slots__ = ("rows", "cols", "_bits")

    def __init__(self, rows: int, cols: int, bits: BitVector):
        if len(bits) != rows * cols:
            raise ValueError(
                f"bit count {len(bits)} does not match {rows}x{cols} matrix"
            )
        self.rows = rows
        self.cols = cols
        self._bits = bits

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BitMatrix":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("BitMatrix.from_array needs a 2-d array")
        return cls(arr.shape[0], arr.shape[1], BitVector(arr.reshape(-1)))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, BitVector.zeros(rows * cols))

    def bit(self, i: int, j: int) -> int:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"({i}, {j}) out of range for {self.rows}x{self.cols}")
        return self._bits[i * self.cols + j]

    def row(self, i: int) -> BitVector:
        arr = self.to_array()
        return BitVector(arr[i, :])

    def col(self, j: int) -> BitVector:
        arr = self.to_array()
        return BitVector(arr[:, j])

    def flat(self) -> BitVector:
        return self._bits

    def to_array(self) -> np.ndarray:
        return self._bits.to_array().reshape(self.rows, self.cols)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self._bits == other._bits
        )

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self._bits))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True)
class LabeledExample:
    """One sample: a bit-matrix feature block flattened row-major, plus a label."""

    features: BitVector
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


STREAM_MAGIC = b"GLHS"
ORDER_ROW_MAJOR = 0
_HEADER_FMT = "<4sBIIBQI"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)


@dataclass(frozen=True)
class StreamHeader:
    rows: int
    cols: int
    count: int
    meta: str = ""
    order_tag: int = ORDER_ROW_MAJOR

    @property
    def bits_per_example(self) -> int:
        return self.rows * self.cols

    @property
    def record_size(self) -> int:
        # packed feature bytes plus one label byte
        return (self.bits_per_example + 7) // 8 + 1


def _encode_header(header: StreamHeader) -> bytes:
    meta = header.meta.encode("utf-8")
    fixed = struct.pack(
        _HEADER_FMT,
        STREAM_MAGIC,
        STREAM_FORMAT_VERSION,
        header.rows,
        header.cols,
        header.order_tag,
        header.count,
        len(meta),
    )
    return fixed + meta


def _decode_header(blob: bytes) -> tuple[StreamHeader, int]:
    if len(blob) < _HEADER_SIZE:
        raise FormatError("stream too short for a header")
    magic, version, rows, cols, order, count, meta_len = struct.unpack(
        _HEADER_FMT, blob[:_HEADER_SIZE]
    )
    if magic != STREAM_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {STREAM_MAGIC!r}")
    if version != STREAM_FORMAT_VERSION:
        raise FormatError(f"unsupported stream format version {version}")
    if order != ORDER_ROW_MAJOR:
        raise FormatError(f"unknown coordinate-order tag {order}")
    if len(blob) < _HEADER_SIZE + meta_len:
        raise CorruptionError("stream truncated inside header metadata")
    meta = blob[_HEADER_SIZE : _HEADER_SIZE + meta_len].decode("utf-8")
    header = StreamHeader(rows=rows, cols=cols, count=count, meta=meta, order_tag=order)
    return header, _HEADER_SIZE + meta_len


def pack_example(example: LabeledExample, rows: int, cols: int) -> bytes:
    """Fixed-width record: packed row-major feature bits, then one label byte."""
    if len(example.features) != rows * cols:
        raise ValueError(
            f"feature length {len(example.features)} does not match {rows}x{cols}"
        )
    return example.features.packed_bytes() + bytes([example.label])


def unpack_example(record: bytes, rows: int, cols: int) -> LabeledExample:
    nbytes = (rows * cols + 7) // 8
    if len(record) != nbytes + 1:
        raise CorruptionError(
            f"record is {len(record)} bytes, expected {nbytes + 1}"
        )
    label = record[nbytes]
    if label not in (0, 1):
        raise CorruptionError(f"label byte must be 0 or 1, got {label}")
    packed = np.frombuffer(record[:nbytes], dtype=np.uint8)
    features = BitVector._from_packed(packed, rows * cols)
    return LabeledExample(features=features, label=label)


class StreamWriter:
    """Writes a GLHS example stream; the count field is patched on close."""

    def __init__(self, path: str, rows: int, cols: int, meta: str = ""):
        self.rows = rows
        self.cols = cols
        self.meta = meta
        self._count = 0
        self._fh = open(path, "wb")
        self._fh.write(
            _encode_header(StreamHeader(rows=rows, cols=cols, count=0, meta=meta))
        )

    def append(self, example: LabeledExample) -> None:
        self._fh.write(pack_example(example, self.rows, self.cols))
        self._count += 1

    def append_batch(self, bits: np.ndarray, labels: np.ndarray) -> None:
        """Append unpacked bit rows (n, rows*cols) with labels (n,)."""
        bits = np.asarray(bits, dtype=np.uint8)
        labels = np.asarray(labels, dtype=np.uint8)
        if bits.ndim != 2 or bits.shape[1] != self.rows * self.cols:
            raise ValueError("batch bits must have shape (n, rows*cols)")
        if labels.shape != (bits.shape[0],):
            raise ValueError("labels must match the batch row count")
        packed = np.packbits(bits, axis=1, bitorder="little")
        records = np.concatenate([packed, labels[:, None]], axis=1)
        self._fh.write(records.tobytes())
        self._count += bits.shape[0]

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.flush()
        self._fh.seek(0)
        self._fh.write(
            _encode_header(
                StreamHeader(rows=self.rows, cols=self.cols, count=self._count, meta=self.meta)
            )
        )
        self._fh.close()

    def __enter__(self) -> "StreamWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class StreamReader:
    """Reads a GLHS example stream with full-length validation up front."""

    def __init__(self, path: str):
        self.path = path
        with open(path, "rb") as fh:
            blob = fh.read()
        self.header, self._body_offset = _decode_header(blob)
        body = len(blob) - self._body_offset
        expected = self.header.count * self.header.record_size
        if body != expected:
            raise CorruptionError(
                f"stream body is {body} bytes, header implies {expected}"
            )
        self._blob = blob

    def __len__(self) -> int:
        return self.header.count

    def __iter__(self) -> Iterator[LabeledExample]:
        rs = self.header.record_size
        for i in range(self.header.count):
            off = self._body_offset + i * rs
            yield unpack_example(
                self._blob[off : off + rs], self.header.rows, self.header.cols
            )

    def read_batches(self, chunk: int = 4096) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield (bits (n, rows*cols) uint8, labels (n,) uint8) chunks."""
        rs = self.header.record_size
        dim = self.header.bits_per_example
        raw = np.frombuffer(
            self._blob, dtype=np.uint8, offset=self._body_offset
        ).reshape(self.header.count, rs) if self.header.count else np.zeros(
            (0, rs), dtype=np.uint8
        )
        for start in range(0, self.header.count, chunk):
            block = raw[start : start + chunk]
            bits = np.unpackbits(block[:, :-1], axis=1, count=dim, bitorder="little")
            labels = block[:, -1].copy()
            if not np.isin(labels, (0, 1)).all():
                raise CorruptionError("label byte must be 0 or 1")
            yield bits, labels


def read_stream(path: str) -> tuple[StreamHeader, list[LabeledExample]]:
    reader = StreamReader(path)
    return reader.header, list(reader)
