"""DCT synthesis dictionary and the effective operator ``Phi @ D``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sensing import SparseBinaryMatrix


@dataclass(frozen=True)
class DctDictionary:
    """Orthonormal inverse-DCT basis; ``x = matrix @ theta``, ``theta = matrix.T @ x``."""

    n: int
    matrix: np.ndarray

    def synthesize(self, theta) -> np.ndarray:
        return self.matrix @ np.asarray(theta, dtype=float)

    def analyze(self, x) -> np.ndarray:
        return self.matrix.T @ np.asarray(x, dtype=float)


def dct_dictionary(n: int) -> DctDictionary:
    """Columns are the orthonormal DCT-II atoms of length ``n``."""
    if n < 1:
        raise ValueError(f"dictionary dimension must be >= 1, got {n}")
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * j + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    mat[:, 0] = np.sqrt(1.0 / n)
    mat.setflags(write=False)
    return DctDictionary(n=n, matrix=mat)


def effective_operator(phi: SparseBinaryMatrix, dictionary) -> np.ndarray:
    """Dense ``Phi @ D``; ``dictionary`` may be a :class:`DctDictionary` or a square array."""
    mat = dictionary.matrix if isinstance(dictionary, DctDictionary) else np.asarray(dictionary, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != phi.n:
        raise ValueError(f"dictionary rows {mat.shape[0] if mat.ndim else None} != matrix columns n={phi.n}")
    # row r of Phi @ D is the sum of the dictionary rows that feed measurement r
    out = np.zeros((phi.m, mat.shape[1]))
    np.add.at(out, phi.cols.ravel(), np.repeat(mat, phi.k, axis=0))
    return out
