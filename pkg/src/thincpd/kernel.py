"""Characteristic kernels, the median bandwidth heuristic and the h-statistic.

Both kernel families satisfy ``k(x, x) = 1`` and take values in ``(0, 1]``::

    rbf      k(x, y) = exp(-||x - y||^2 / gamma^2)
    laplace  k(x, y) = exp(-||x - y|| / gamma)

Note the RBF denominator is ``gamma^2``, not ``2 gamma^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateBandwidthError, InputError

FAMILIES = ("rbf", "laplace")

# Above this many points the median heuristic runs on a seeded subset.
MEDIAN_EXACT_LIMIT = 2000


def as_points(points, name: str = "points") -> np.ndarray:
    """Coerce ``points`` into a finite ``(n, d)`` float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise InputError(f"{name} must be a 2-d array of shape (n, d), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite coordinates")
    return arr


def as_point(x, name: str = "point") -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size < 1:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite coordinates")
    return arr


@dataclass(frozen=True)
class Kernel:
    """An RBF or Laplace kernel with a fixed bandwidth."""

    family: str = "rbf"
    bandwidth: float = 1.0

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        bw = float(self.bandwidth)
        if not (math.isfinite(bw) and bw > 0):
            raise InputError(f"kernel bandwidth must be positive and finite, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", bw)

    def from_sqdist(self, sqdist):
        """Kernel values from squared Euclidean distances."""
        if self.family == "rbf":
            return np.exp(-np.asarray(sqdist) / self.bandwidth**2)
        return np.exp(-np.sqrt(sqdist) / self.bandwidth)

    def __call__(self, x, y) -> float:
        return eval_kernel(self, x, y)

    def gram(self, X, Y=None) -> np.ndarray:
        """Kernel matrix ``K[i, j] = k(X[i], Y[j])``."""
        X = as_points(X, "X")
        Y = X if Y is None else as_points(Y, "Y")
        if X.shape[1] != Y.shape[1]:
            raise InputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        return self.from_sqdist(cdist(X, Y, "sqeuclidean"))

    def column(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Kernel values between each row of ``X`` and the single point ``y``.

        No validation; callers pass arrays of matching dimension.
        """
        diff = X - y
        return self.from_sqdist(np.einsum("ij,ij->i", diff, diff))


def eval_kernel(k: Kernel, x, y) -> float:
    """Evaluate ``k(x, y)`` for two points of equal dimension."""
    x = as_point(x, "x")
    y = as_point(y, "y")
    if x.shape != y.shape:
        raise InputError(f"dimension mismatch: {x.size} vs {y.size}")
    diff = x - y
    sq = float(diff @ diff)
    if k.family == "rbf":
        return math.exp(-sq / k.bandwidth**2)
    return math.exp(-math.sqrt(sq) / k.bandwidth)


def median_heuristic(samples, seed: int = 0, exact_limit: int = MEDIAN_EXACT_LIMIT) -> float:
    """Median of all pairwise Euclidean distances between ``samples``.

    For an even number of pairs the two middle order statistics are averaged.
    Pools larger than ``exact_limit`` are reduced to a seeded random subset of
    ``exact_limit`` points first.

    Raises:
        InputError: fewer than two points.
        DegenerateBandwidthError: the median distance is zero.
    """
    X = as_points(samples, "samples")
    n = X.shape[0]
    if n < 2:
        raise InputError("median heuristic needs at least 2 points")
    if n > exact_limit:
        rng = np.random.default_rng(seed)
        X = X[np.sort(rng.choice(n, size=exact_limit, replace=False))]
    med = float(np.median(pdist(X, "euclidean")))
    if not med > 0:
        raise DegenerateBandwidthError("median pairwise distance is 0; all points (nearly) identical")
    return med


def h_stat(k: Kernel, xi, xj, yi, yj) -> float:
    """Four-point statistic ``k(xi,xj) + k(yi,yj) - k(xi,yj) - k(xj,yi)``.

    Repeated arguments are allowed; index constraints are the caller's business.
    """
    return eval_kernel(k, xi, xj) + eval_kernel(k, yi, yj) - eval_kernel(k, xi, yj) - eval_kernel(k, xj, yi)


def h_stat_batch(k: Kernel, xi, xj, yi, yj) -> np.ndarray:
    """Row-wise :func:`h_stat` over four ``(n, d)`` arrays."""

    def kk(a, b):
        diff = a - b
        return k.from_sqdist(np.einsum("ij,ij->i", diff, diff))

    return kk(xi, xj) + kk(yi, yj) - kk(xi, yj) - kk(xj, yi)
