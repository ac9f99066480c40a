"""Distortion and wall-clock timing helpers."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Callable, TypeVar

import numpy as np

T = TypeVar("T")


def prd(x, x_hat) -> float:
    """Percentage root-mean-square distortion ``100 * ||x - x_hat|| / ||x||``.

    Raises
    ------
    ValueError
        On a length mismatch or an all-zero reference, where the metric is undefined.
    """
    x = np.asarray(x, dtype=float).ravel()
    x_hat = np.asarray(x_hat, dtype=float).ravel()
    if x.shape != x_hat.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {x_hat.shape[0]}")
    ref = np.linalg.norm(x)
    if ref == 0.0:
        raise ValueError("PRD is undefined for a zero reference signal")
    return float(100.0 * np.linalg.norm(x - x_hat) / ref)


@dataclass(frozen=True)
class DistortionReport:
    prd: float
    n: int
    packet_index: int | None = None

    @classmethod
    def compute(cls, x, x_hat, packet_index: int | None = None) -> "DistortionReport":
        return cls(prd=prd(x, x_hat), n=int(np.size(x)), packet_index=packet_index)


def time_op(thunk: Callable[[], T]) -> tuple[T, float]:
    """Run ``thunk`` once, returning its result and the elapsed monotonic seconds."""
    start = time.perf_counter()
    result = thunk()
    return result, time.perf_counter() - start


@dataclass(frozen=True)
class Timing:
    median: float
    mean: float
    runs: int


def repeat_timing(thunk: Callable[[], T], runs: int = 5) -> tuple[T, Timing]:
    """Time ``runs`` calls; the last result is returned alongside median and mean."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    samples = []
    result = None
    for _ in range(runs):
        result, dt = time_op(thunk)
        samples.append(dt)
    return result, Timing(statistics.median(samples), statistics.fmean(samples), runs)
