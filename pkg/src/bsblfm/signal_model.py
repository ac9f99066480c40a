"""Block partitions, packet framing of sample streams, and synthetic test signals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np


class PartitionError(ValueError):
    """Raised when a block partition cannot be built from the given sizes."""


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous, non-overlapping blocks covering ``range(n)``.

    Use :func:`uniform_partition` for equal blocks or
    :meth:`from_sizes` for explicit (possibly unequal) block sizes.
    """

    boundaries: tuple[int, ...]
    sizes: tuple[int, ...]
    n: int

    def __post_init__(self):
        if len(self.sizes) == 0:
            raise PartitionError("a partition needs at least one block")
        if len(self.boundaries) != len(self.sizes):
            raise PartitionError("boundaries and sizes differ in length")
        if any(d < 1 for d in self.sizes):
            raise PartitionError(f"block sizes must be positive, got {self.sizes}")
        if sum(self.sizes) != self.n:
            raise PartitionError(f"sizes sum to {sum(self.sizes)}, expected n={self.n}")
        expected = tuple(np.concatenate(([0], np.cumsum(self.sizes)[:-1])).tolist())
        if tuple(self.boundaries) != expected:
            raise PartitionError("boundaries must be the running sum of sizes starting at 0")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockPartition":
        sizes = tuple(int(d) for d in sizes)
        if any(d < 1 for d in sizes):
            raise PartitionError(f"block sizes must be positive, got {sizes}")
        bounds = tuple(int(b) for b in np.concatenate(([0], np.cumsum(sizes)[:-1])))
        return cls(boundaries=bounds, sizes=sizes, n=int(sum(sizes)))

    @property
    def g(self) -> int:
        return len(self.sizes)

    def slice(self, i: int) -> slice:
        start = self.boundaries[i]
        return slice(start, start + self.sizes[i])

    def slices(self) -> list[slice]:
        return [self.slice(i) for i in range(self.g)]

    @property
    def is_uniform(self) -> bool:
        return len(set(self.sizes)) == 1


def uniform_partition(n: int, block_size: int) -> BlockPartition:
    """Split ``n`` coefficients into ``n // block_size`` equal blocks.

    Raises
    ------
    PartitionError
        If ``block_size`` does not divide ``n``.
    """
    if n < 1 or block_size < 1:
        raise PartitionError(f"n and block_size must be positive (n={n}, block_size={block_size})")
    if n % block_size:
        raise PartitionError(f"block size {block_size} does not divide n={n}")
    return BlockPartition.from_sizes([block_size] * (n // block_size))


@dataclass(frozen=True)
class Packet:
    samples: np.ndarray
    index: int
    source_id: Hashable = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True)
class Packetization:
    """Result of :func:`packetize`; ``dropped`` counts trailing samples not packed."""

    packets: list[Packet] = field(default_factory=list)
    dropped: int = 0

    def __iter__(self):
        return iter(self.packets)

    def __len__(self):
        return len(self.packets)


def packetize(stream, packet_size: int, source_id: Hashable = None) -> Packetization:
    """Cut ``stream`` into consecutive non-overlapping packets.

    A trailing remainder shorter than ``packet_size`` is dropped rather than
    zero-padded; its length is returned in ``Packetization.dropped``.
    """
    if packet_size < 1:
        raise ValueError(f"packet_size must be >= 1, got {packet_size}")
    x = np.asarray(stream, dtype=float).ravel()
    count = x.shape[0] // packet_size
    packets = [
        Packet(x[j * packet_size:(j + 1) * packet_size].copy(), index=j, source_id=source_id)
        for j in range(count)
    ]
    return Packetization(packets=packets, dropped=int(x.shape[0] - count * packet_size))


def ar1_sequence(length: int, r: float, rng: np.random.Generator) -> np.ndarray:
    # stationary AR(1) with unit marginal variance
    e = rng.standard_normal(length)
    out = np.empty(length)
    out[0] = e[0]
    scale = np.sqrt(max(1.0 - r * r, 0.0))
    for t in range(1, length):
        out[t] = r * out[t - 1] + scale * e[t]
    return out


def block_sparse_signal(
    part: BlockPartition,
    active_blocks: int,
    intra_r: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw a block-sparse vector whose nonzero blocks are AR(1) sequences.

    Returns
    -------
    x : ndarray, shape (part.n,)
    support : ndarray of int
        Sorted ids of the nonzero blocks.
    """
    if not 0 <= active_blocks <= part.g:
        raise ValueError(f"active_blocks must be in [0, {part.g}], got {active_blocks}")
    support = np.sort(rng.choice(part.g, size=active_blocks, replace=False))
    x = np.zeros(part.n)
    for i in support:
        x[part.slice(int(i))] = ar1_sequence(part.sizes[i], intra_r, rng)
    return x, support
