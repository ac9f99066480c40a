"""Sparse binary sensing matrices and the two equivalent encoders.

A matrix is fully determined by ``(m, n, k, seed)``, so only those four
numbers are ever written to disk; the decoder regenerates the row indices.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
MEAS_MAGIC = b"BSBLMEAS"


@dataclass(frozen=True)
class SparseBinaryMatrix:
    """M x N binary matrix with exactly ``k`` ones in every column.

    ``cols[i]`` holds the sorted row indices of the ones in column ``i``.
    """

    m: int
    n: int
    k: int
    cols: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        cols = np.asarray(self.cols, dtype=np.int64)
        if cols.shape != (self.n, self.k):
            raise ValueError(f"cols must have shape ({self.n}, {self.k}), got {cols.shape}")
        if cols.size and (cols.min() < 0 or cols.max() >= self.m):
            raise ValueError("row index out of range")
        if self.k > 1 and np.any(np.diff(np.sort(cols, axis=1), axis=1) == 0):
            raise ValueError("duplicate row index within a column")
        cols.setflags(write=False)
        object.__setattr__(self, "cols", cols)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        out[self.cols, np.arange(self.n)[:, None]] = 1.0
        return out

    def header(self) -> dict:
        return {"m": self.m, "n": self.n, "k": self.k, "seed": self.seed,
                "format_version": FORMAT_VERSION}


def generate(m: int, n: int, k: int, seed: int) -> SparseBinaryMatrix:
    """Draw a sparse binary matrix; each column's ``k`` rows are sampled without replacement.

    Raises ``ValueError`` unless ``1 <= k <= m < n``.
    """
    if not (1 <= k <= m):
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    if not m < n:
        raise ValueError(f"sensing matrix must be compressive (m < n), got m={m}, n={n}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    rows = rng.permuted(np.tile(np.arange(m), (n, 1)), axis=1)[:, :k]
    return SparseBinaryMatrix(m=m, n=n, k=k, cols=np.sort(rows, axis=1), seed=int(seed))


@dataclass(frozen=True)
class Measurement:
    values: np.ndarray
    packet_index: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


def encode_stream(phi: SparseBinaryMatrix, x, packet_index: int = 0) -> Measurement:
    """On-the-fly encoder: add each sample into its ``k`` accumulator slots.

    Samples are consumed in index order, one at a time, exactly as a sensor
    front-end would see them; no multiplications are performed.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != phi.n:
        raise ValueError(f"signal length {x.shape[0]} does not match matrix columns n={phi.n}")
    y = np.zeros(phi.m)
    for i in range(phi.n):
        y[phi.cols[i]] += x[i]
    return Measurement(y, packet_index)


def encode(phi: SparseBinaryMatrix, x, packet_index: int = 0) -> Measurement:
    """Batch encoder, ``dense(phi) @ x``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != phi.n:
        raise ValueError(f"signal length {x.shape[0]} does not match matrix columns n={phi.n}")
    return Measurement(phi.dense() @ x, packet_index)


def compression_ratio(n: int, m: int) -> float:
    if not 0 < m <= n:
        raise ValueError(f"need 0 < m <= n, got m={m}, n={n}")
    return (n - m) / n


def measurements_for_cr(n: int, cr: float) -> int:
    """Row count whose compression ratio is nearest to ``cr`` (half rounds up)."""
    if not 0 <= cr < 1:
        raise ValueError(f"compression ratio must lie in [0, 1), got {cr}")
    m = int(np.floor(n * (1.0 - cr) + 0.5))
    return min(max(m, 1), n)


# -- serialization ----------------------------------------------------------


def header_to_json(phi: SparseBinaryMatrix) -> str:
    return json.dumps(phi.header(), sort_keys=True) + "\n"


def matrix_from_header(header: dict) -> SparseBinaryMatrix:
    """Regenerate a matrix from its header; raises ``KeyError`` on a missing field."""
    missing = [key for key in ("m", "n", "k", "seed") if header.get(key) is None]
    if missing:
        raise KeyError(f"matrix header lacks {', '.join(missing)}")
    version = header.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported matrix format_version {version}")
    return generate(int(header["m"]), int(header["n"]), int(header["k"]), int(header["seed"]))


def write_matrix_header(phi: SparseBinaryMatrix, path) -> None:
    Path(path).write_text(header_to_json(phi))


def read_matrix_header(path) -> SparseBinaryMatrix:
    return matrix_from_header(json.loads(Path(path).read_text()))


def write_measurements(path, measurements, meta: dict) -> None:
    """Write measurements as CSV (default) or binary when the suffix is ``.bin``.

    CSV: a ``# {json}`` metadata line, then one ``packet_index,y_0,...`` row per packet.
    Binary: ``MEAS_MAGIC``, a little-endian u32 JSON length, the JSON metadata,
    then every packet's values as little-endian float64 in packet order.
    """
    path = Path(path)
    meta = dict(meta, format_version=FORMAT_VERSION, packets=len(measurements),
                indices=[int(mm.packet_index) for mm in measurements])
    if path.suffix == ".bin":
        blob = json.dumps(meta, sort_keys=True).encode()
        with path.open("wb") as fh:
            fh.write(MEAS_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for mm in measurements:
                fh.write(np.asarray(mm.values, dtype="<f8").tobytes())
        return
    meta.pop("indices")
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for mm in measurements:
        writer.writerow([int(mm.packet_index)] + [repr(float(v)) for v in mm.values])
    path.write_text(buf.getvalue())


class FormatError(ValueError):
    """Input file does not follow the expected layout."""


def read_measurements(path) -> tuple[list[Measurement], dict]:
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(MEAS_MAGIC):
        off = len(MEAS_MAGIC)
        (hlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        try:
            meta = json.loads(raw[off:off + hlen])
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: corrupt binary header") from exc
        off += hlen
        m = int(meta["m"])
        values = np.frombuffer(raw, dtype="<f8", offset=off)
        if values.size != m * meta["packets"]:
            raise FormatError(f"{path}: expected {meta['packets']} packets of {m} values")
        rows = values.reshape(meta["packets"], m)
        return [Measurement(r.copy(), i) for r, i in zip(rows, meta["indices"])], meta
    text = raw.decode()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise FormatError(f"{path}: missing '# {{json}}' metadata line")
    try:
        meta = json.loads(lines[0][1:])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad metadata line") from exc
    out = []
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row:
            continue
        try:
            out.append(Measurement(np.array([float(v) for v in row[1:]]), int(row[0])))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out, meta
