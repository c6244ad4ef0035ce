"""Unbiased estimators of squared MMD between two samples."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .kernel import Kernel, as_points


def _offdiag_sum(K: np.ndarray) -> float:
    return float(K.sum() - np.trace(K))


def mmd_u(k: Kernel, X, Y) -> float:
    """Three-term U-statistic estimate of MMD^2.

    ``mean_{i!=j} k(X_i, X_j) + mean_{i!=j} k(Y_i, Y_j) - 2 mean_{i,j} k(X_i, Y_j)``
    with sample sizes ``m = len(X)`` and ``n = len(Y)``, both at least 2.
    """
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    m, n = len(X), len(Y)
    if m < 2 or n < 2:
        raise InputError(f"mmd_u needs at least 2 points per sample, got {m} and {n}")
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    kxx = _offdiag_sum(k.gram(X)) / (m * (m - 1))
    kyy = _offdiag_sum(k.gram(Y)) / (n * (n - 1))
    kxy = float(k.gram(X, Y).sum()) / (m * n)
    return kxx + kyy - 2.0 * kxy


def mmd_s(k: Kernel, X, Y) -> float:
    """Paired estimate ``mean_{i != j} h(X_i, X_j, Y_i, Y_j)`` for equal-size samples.

    ``X_i`` is paired with ``Y_i`` by position, so the value depends on the
    joint ordering of the two samples.
    """
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    n = len(X)
    if len(Y) != n:
        raise InputError(f"mmd_s needs equal sample sizes, got {n} and {len(Y)}")
    if n < 2:
        raise InputError(f"mmd_s needs at least 2 points per sample, got {n}")
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    kxy = k.gram(X, Y)
    # sum_{i != j} [k(X_i, Y_j) + k(X_j, Y_i)] = 2 * offdiag(Kxy)
    total = _offdiag_sum(k.gram(X)) + _offdiag_sum(k.gram(Y)) - 2.0 * _offdiag_sum(kxy)
    return total / (n * (n - 1))
