"""Independent from-scratch references used by the tests."""

from __future__ import annotations

import math

import numpy as np

from bsblfm.signal_model import block_sparse_signal, uniform_partition


def model_covariance(op, beta_inv, A_list, part, skip=None):
    C = beta_inv * np.eye(op.shape[0])
    for i, sl in enumerate(part.slices()):
        if i == skip or not np.any(A_list[i]):
            continue
        C += op[:, sl] @ A_list[i] @ op[:, sl].T
    return C


def dense_cost(op, y, beta_inv, A_list, part):
    """``log|C| + y^T C^{-1} y`` with C built and factorized directly."""
    C = model_covariance(op, beta_inv, A_list, part)
    sign, logdet = np.linalg.slogdet(C)
    assert sign > 0
    return logdet + y @ np.linalg.solve(C, y)


def explicit_excluded(op, y, beta_inv, A_list, part, i):
    """``(Phi_i^T C_{-i}^{-1} Phi_i, Phi_i^T C_{-i}^{-1} y)`` with block i left out of C."""
    C = model_covariance(op, beta_inv, A_list, part, skip=i)
    Phi_i = op[:, part.slice(i)]
    return Phi_i.T @ np.linalg.solve(C, Phi_i), Phi_i.T @ np.linalg.solve(C, y)


def _mirror(a, j):
    n = len(a)
    if j < 0:
        j = -j
    if j >= n:
        j = 2 * (n - 1) - j
    return a[j]


def lifting_stage(x):
    """Plain-loop transcription of the two 5/3 lifting equations with mirror borders."""
    a = [int(v) for v in x]
    half = len(a) // 2
    high = [a[2 * k + 1] + math.floor(-(a[2 * k] + _mirror(a, 2 * k + 2)) / 2) for k in range(half)]
    low = []
    for k in range(half):
        prev = high[k - 1] if k > 0 else high[0]
        low.append(a[2 * k] + math.floor((prev + high[k]) / 4 + 0.5))
    return low, high


def noisy_instance(seed, n=64, m=48, d=4, active=3, snr_db=20.0):
    """Small random problem with a Gaussian operator; ``beta_inv`` matches the noise."""
    rng = np.random.default_rng(seed)
    part = uniform_partition(n, d)
    op = rng.standard_normal((m, n)) / np.sqrt(m)
    theta, support = block_sparse_signal(part, active, 0.9, rng)
    y0 = op @ theta
    sd = np.sqrt(np.mean(y0 ** 2) / 10 ** (snr_db / 10))
    y = y0 + sd * rng.standard_normal(m)
    return op, y, part, theta, support, sd * sd
