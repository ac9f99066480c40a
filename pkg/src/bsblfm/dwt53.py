"""Integer CDF 5/3 lifting wavelet compressor with threshold testing.

Index convention: for a stage input ``a`` of even length, the high-pass
coefficients sit on the odd (0-based) samples and the low-pass on the even
ones::

    high[k] = a[2k+1] + floor(-(a[2k] + a[2k+2]) / 2)
    low[k]  = a[2k]   + floor((high[k-1] + high[k]) / 4 + 1/2)

Borders use whole-sample symmetric extension, ``a[n] = a[n-2]`` on the right
and hence ``high[-1] = high[0]`` on the left.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
STREAM_MAGIC = b"DWT53STR"
FILE_MAGIC = b"DWT53PKT"
_STREAM_HEADER = struct.Struct("<HIHHI")  # version, n, stages, T, count


def _as_int_vector(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError("expected a 1-D integer vector")
    if arr.dtype.kind == "f":
        if not np.all(arr == np.round(arr)):
            raise ValueError("lifting input must be integer valued")
    return arr.astype(np.int64)


def forward_stage(x) -> tuple[np.ndarray, np.ndarray]:
    """One lifting step: split an even-length integer vector into ``(low, high)``."""
    a = _as_int_vector(x)
    n = a.shape[0]
    if n < 2 or n % 2:
        raise ValueError(f"forward_stage needs an even length >= 2, got {n}")
    even = a[0::2]
    odd = a[1::2]
    right = np.append(even[1:], a[n - 2])
    high = odd + (-(even + right)) // 2
    left = np.insert(high[:-1], 0, high[0])
    low = even + (left + high + 2) // 4
    return low, high


def inverse_stage(low, high) -> np.ndarray:
    low = _as_int_vector(low)
    high = _as_int_vector(high)
    if low.shape != high.shape or low.size == 0:
        raise ValueError("low and high bands must be non-empty and equally long")
    left = np.insert(high[:-1], 0, high[0])
    even = low - (left + high + 2) // 4
    # mirror: a[n] = a[n-2], which is the last even sample
    right = np.append(even[1:], even[-1])
    odd = high - (-(even + right)) // 2
    out = np.empty(2 * low.size, dtype=np.int64)
    out[0::2] = even
    out[1::2] = odd
    return out


@dataclass(frozen=True)
class LiftingCoefficients:
    """``bands[0]`` is the coarsest low-pass band; high-pass bands follow, coarsest first."""

    stages: int
    bands: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return int(sum(b.size for b in self.bands))

    def flatten(self) -> np.ndarray:
        return np.concatenate(self.bands)

    @property
    def band_sizes(self) -> list[int]:
        return [int(b.size) for b in self.bands]

    @classmethod
    def from_flat(cls, flat, n: int, stages: int) -> "LiftingCoefficients":
        sizes = band_sizes(n, stages)
        flat = _as_int_vector(flat)
        if flat.size != n:
            raise ValueError(f"expected {n} coefficients, got {flat.size}")
        cuts = np.cumsum(sizes)[:-1]
        return cls(stages=stages, bands=tuple(np.split(flat, cuts)))


def band_sizes(n: int, stages: int) -> list[int]:
    if stages < 0:
        raise ValueError("stages must be >= 0")
    if n < 1 or n % (1 << stages):
        raise ValueError(f"length {n} is not divisible by 2^{stages}")
    return [n >> stages] + [n >> s for s in range(stages, 0, -1)]


def forward(x, stages: int) -> LiftingCoefficients:
    """Apply ``stages`` lifting steps, each on the previous low band."""
    a = _as_int_vector(x)
    band_sizes(a.size, stages)
    highs = []
    low = a
    for _ in range(stages):
        low, high = forward_stage(low)
        highs.append(high)
    return LiftingCoefficients(stages=stages, bands=(low, *reversed(highs)))


def inverse(coeffs: LiftingCoefficients) -> np.ndarray:
    """Exact inverse of :func:`forward`."""
    bands = coeffs.bands
    if len(bands) != coeffs.stages + 1:
        raise ValueError(f"{coeffs.stages} stages need {coeffs.stages + 1} bands, got {len(bands)}")
    low = _as_int_vector(bands[0])
    for high in bands[1:]:
        high = _as_int_vector(high)
        if high.size != low.size:
            raise ValueError("band sizes do not form a dyadic pyramid")
        low = inverse_stage(low, high)
    return low


@dataclass(frozen=True)
class ThresholdedStream:
    values: np.ndarray
    locations: np.ndarray
    t: int
    n: int
    stages: int

    def expand(self) -> LiftingCoefficients:
        """Zero-filled coefficient pyramid holding only the surviving values."""
        flat = np.zeros(self.n, dtype=np.int64)
        flat[self.locations] = self.values
        return LiftingCoefficients.from_flat(flat, self.n, self.stages)


def threshold_compress(coeffs: LiftingCoefficients, T: int) -> ThresholdedStream:
    """Keep coefficients whose magnitude needs more than ``T`` bits, i.e. ``|v| >= 2**T``."""
    if T < 0 or int(T) != T:
        raise ValueError(f"threshold exponent must be a non-negative integer, got {T}")
    flat = coeffs.flatten()
    # floor(|v| / 2^T) == 0 means the coefficient is discarded
    keep = np.flatnonzero((np.abs(flat) >> int(T)) >= 1)
    return ThresholdedStream(values=flat[keep], locations=keep, t=int(T),
                             n=coeffs.n, stages=coeffs.stages)


# -- serialization -------------------------------------------------------------


def _put_varint(value: int, out: bytearray) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _get_varint(buf: bytes, pos: int) -> tuple[int, int]:
    shift = result = 0
    while True:
        if pos >= len(buf):
            raise ValueError("truncated varint")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7


def encode_stream_bytes(stream: ThresholdedStream) -> bytes:
    """Header, delta-coded varint locations, then little-endian int32 values."""
    out = bytearray(STREAM_MAGIC)
    out += _STREAM_HEADER.pack(FORMAT_VERSION, stream.n, stream.stages, stream.t, stream.values.size)
    prev = 0
    for loc in stream.locations.tolist():
        _put_varint(loc - prev, out)
        prev = loc
    out += np.asarray(stream.values, dtype="<i4").tobytes()
    return bytes(out)


def decode_stream_bytes(buf: bytes) -> tuple[ThresholdedStream, int]:
    """Parse one stream; returns it with the number of bytes consumed."""
    if not buf.startswith(STREAM_MAGIC):
        raise ValueError("not a DWT53 stream (bad magic)")
    pos = len(STREAM_MAGIC)
    version, n, stages, T, count = _STREAM_HEADER.unpack_from(buf, pos)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported stream format_version {version}")
    pos += _STREAM_HEADER.size
    locs = np.empty(count, dtype=np.int64)
    prev = 0
    for j in range(count):
        delta, pos = _get_varint(buf, pos)
        prev += delta
        locs[j] = prev
    end = pos + 4 * count
    if end > len(buf):
        raise ValueError("truncated coefficient payload")
    values = np.frombuffer(buf[pos:end], dtype="<i4").astype(np.int64)
    if count and (np.any(np.diff(locs) <= 0) or locs[-1] >= n):
        raise ValueError("locations must be strictly increasing and < n")
    return ThresholdedStream(values=values, locations=locs, t=T, n=n, stages=stages), end


def write_streams(path, streams, meta: dict) -> None:
    """Container: magic, u32 JSON length, JSON metadata, then per packet ``u32 index, u32 length, stream``."""
    blob = json.dumps(dict(meta, format_version=FORMAT_VERSION, packets=len(streams)),
                      sort_keys=True).encode()
    out = bytearray(FILE_MAGIC)
    out += struct.pack("<I", len(blob)) + blob
    for index, stream in streams:
        payload = encode_stream_bytes(stream)
        out += struct.pack("<II", index, len(payload)) + payload
    Path(path).write_bytes(bytes(out))


def read_streams(path) -> tuple[list[tuple[int, ThresholdedStream]], dict]:
    raw = Path(path).read_bytes()
    if not raw.startswith(FILE_MAGIC):
        raise ValueError(f"{path}: not a DWT53 packet file")
    pos = len(FILE_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    meta = json.loads(raw[pos:pos + hlen])
    pos += hlen
    streams = []
    for _ in range(meta["packets"]):
        index, length = struct.unpack_from("<II", raw, pos)
        pos += 8
        stream, used = decode_stream_bytes(raw[pos:pos + length])
        if used != length:
            raise ValueError(f"{path}: packet {index} has trailing bytes")
        streams.append((index, stream))
        pos += length
    return streams, meta
