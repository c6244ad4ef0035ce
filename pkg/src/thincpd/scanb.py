"""Scan-B detector.

N fixed reference blocks of size B are drawn from the history pool once.
At each time ``t >= B`` the last B stream points form the test block and::

    Z_t = mean_i mmd_s(block_i, window) / sigma(B)

with ``sigma(B)^2 = (C2 + (C1 - C2) / N) / comb(B, 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .datagen import rng_for
from .errors import CalibrationError, InputError
from .kernel import Kernel, as_point, h_stat_batch
from .thinning import SamplePool

CONSTANTS_POOLS = ("same", "raw")
# offset between a run seed and the seed used to estimate C1, C2
CONSTANTS_SEED_OFFSET = 7919
MIN_TUPLES = 1000


@dataclass(frozen=True)
class ScanBConfig:
    kernel: Kernel
    N: int = 15
    B: int = 50
    seed: int = 0
    n_tuples: int = 10_000
    constants_pool: str = "same"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InputError(f"N must be a positive integer, got {self.N!r}")
        if int(self.B) != self.B or self.B < 2:
            raise InputError(f"B must be an integer >= 2, got {self.B!r}")
        if int(self.n_tuples) != self.n_tuples or self.n_tuples < MIN_TUPLES:
            raise InputError(f"n_tuples must be an integer >= {MIN_TUPLES}, got {self.n_tuples!r}")
        if self.constants_pool not in CONSTANTS_POOLS:
            raise InputError(f"constants_pool must be one of {CONSTANTS_POOLS}, got {self.constants_pool!r}")


@dataclass(frozen=True)
class VarianceConstants:
    C1: float
    C2: float
    sigma_B: float


def null_variance(C1: float, C2: float, B: int, N: int) -> float:
    """``sigma(B)^2`` of the block statistic under the null."""
    return (C2 + (C1 - C2) / N) / math.comb(B, 2)


def constants_from_moments(C1: float, C2: float, B: int, N: int) -> VarianceConstants:
    var = null_variance(C1, C2, B, N)
    if not var > 0:
        raise CalibrationError(
            f"estimated sigma(B)^2 = {var:.3g} <= 0 (C1={C1:.6g}, C2={C2:.6g}); increase n_tuples"
        )
    return VarianceConstants(C1=float(C1), C2=float(C2), sigma_B=math.sqrt(var))


def _distinct_tuples(rng: np.random.Generator, M: int, n: int, width: int) -> np.ndarray:
    idx = rng.integers(0, M, size=(n, width))
    while True:
        srt = np.sort(idx, axis=1)
        bad = np.flatnonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))
        if bad.size == 0:
            return idx
        idx[bad] = rng.integers(0, M, size=(bad.size, width))


def estimate_constants(k: Kernel, pool: SamplePool, cfg: ScanBConfig, n_tuples: Optional[int] = None) -> VarianceConstants:
    """Monte Carlo estimates of C1 and C2 from 6-tuples of distinct pool points.

    ``C1 = E[h(X, X', Y, Y')^2]`` and ``C2 = Cov[h(X, X', Y, Y'), h(X'', X''', Y, Y')]``
    (sample covariance, ``n - 1`` normalization).  Seeded by
    ``cfg.seed + CONSTANTS_SEED_OFFSET``.
    """
    n = cfg.n_tuples if n_tuples is None else int(n_tuples)
    if n < MIN_TUPLES:
        raise InputError(f"n_tuples must be >= {MIN_TUPLES}, got {n}")
    M = len(pool)
    if M < 6:
        raise InputError(f"estimating C1, C2 needs a pool of at least 6 points, got {M}")
    rng = rng_for(cfg.seed + CONSTANTS_SEED_OFFSET)
    idx = _distinct_tuples(rng, M, n, 6)
    P = pool.points
    x, x1, x2, x3, y, y1 = (P[idx[:, j]] for j in range(6))
    h1 = h_stat_batch(k, x, x1, y, y1)
    h2 = h_stat_batch(k, x2, x3, y, y1)
    C1 = float(np.mean(h1**2))
    C2 = float(np.cov(h1, h2, ddof=1)[0, 1])
    return constants_from_moments(C1, C2, cfg.B, cfg.N)


@dataclass
class ScanBState:
    """Mutable Scan-B state for one monitored stream.

    Stream point ``t`` (1-based) lives in ring slot ``(t - 1) % B``.  The
    caches hold, per slot, the kernel column against every reference point
    and the kernel row against the rest of the window.
    """

    cfg: ScanBConfig
    constants: VarianceConstants
    reference: np.ndarray  # (N * B, d), block i is rows i*B .. i*B + B - 1
    t: int = 0
    _ring: np.ndarray = field(default=None, repr=False)
    _cols: np.ndarray = field(default=None, repr=False)  # (N*B, B) k(reference, slot)
    _colsums: np.ndarray = field(default=None, repr=False)  # (N, B) per-block sums of _cols
    _gram: np.ndarray = field(default=None, repr=False)  # (B, B) k(slot, slot')
    _cross: np.ndarray = field(default=None, repr=False)  # (N,) sum_{i,j} k(X_i, Y_j)
    _within_y: float = 0.0  # sum_{i != j} k(Y_i, Y_j)
    _within_x: np.ndarray = field(default=None, repr=False)  # (N,) sum_{i != j} k(X_i, X_j)

    def __post_init__(self):
        N, B = self.cfg.N, self.cfg.B
        d = self.reference.shape[1]
        k = self.cfg.kernel
        self._ring = np.zeros((B, d))
        self._cols = np.zeros((N * B, B))
        self._colsums = np.zeros((N, B))
        self._gram = np.zeros((B, B))
        self._cross = np.zeros(N)
        blocks = self.reference.reshape(N, B, d)
        self._within_x = np.array([k.gram(bl).sum() - np.trace(k.gram(bl)) for bl in blocks])
        self._rows = np.arange(N * B)

    @property
    def dim(self) -> int:
        return self.reference.shape[1]

    @property
    def blocks(self) -> np.ndarray:
        N, B = self.cfg.N, self.cfg.B
        return self.reference.reshape(N, B, self.dim)

    def _slot_order(self) -> np.ndarray:
        """Ring slots of the window points, oldest first."""
        B = self.cfg.B
        n = min(self.t, B)
        return (np.arange(self.t - n, self.t)) % B

    @property
    def window(self) -> np.ndarray:
        return self._ring[self._slot_order()].copy()

    def statistic(self) -> Optional[float]:
        """``Z_t`` from the cached sums, or ``None`` while ``t < B``."""
        N, B = self.cfg.N, self.cfg.B
        if self.t < B:
            return None
        slots = self._slot_order()
        diag = self._cols[self._rows, np.tile(slots, N)].reshape(N, B).sum(axis=1)
        per_block = (self._within_x + self._within_y - 2.0 * (self._cross - diag)) / (B * (B - 1))
        return float(per_block.mean() / self.constants.sigma_B)


def scanb_init(pool: SamplePool, cfg: ScanBConfig, constants: VarianceConstants) -> ScanBState:
    """Draw N*B distinct reference points from ``pool`` with ``cfg.seed``."""
    need = cfg.N * cfg.B
    if len(pool) < need:
        raise InputError(f"pool of {len(pool)} points is smaller than N*B = {need}")
    idx = rng_for(cfg.seed).choice(len(pool), size=need, replace=False)
    return ScanBState(cfg=cfg, constants=constants, reference=pool.points[idx].copy())


def scanb_step(state: ScanBState, y) -> Optional[float]:
    """Push ``y`` into the window and return ``Z_t`` (``None`` while ``t < B``).

    O(N*B) kernel evaluations per step.
    """
    y = as_point(y, "y")
    if y.size != state.dim:
        raise InputError(f"dimension mismatch: stream point has {y.size}, pool has {state.dim}")
    cfg = state.cfg
    k, N, B = cfg.kernel, cfg.N, cfg.B
    state.t += 1
    slot = (state.t - 1) % B
    full = state.t > B
    if full:
        g_old = state._gram[slot]
        state._within_y -= 2.0 * (g_old.sum() - g_old[slot])
        state._cross -= state._colsums[:, slot]

    col = k.column(state.reference, y)
    colsum = col.reshape(N, B).sum(axis=1)
    state._ring[slot] = y
    state._cols[:, slot] = col
    state._colsums[:, slot] = colsum
    state._cross += colsum

    g = k.column(state._ring, y)
    if not full:
        g[state.t:] = 0.0  # slots not yet filled
    g_self = g[slot]
    state._gram[slot, :] = g
    state._gram[:, slot] = g
    state._within_y += 2.0 * (g.sum() - g_self)
    return state.statistic()


def scanb_run(pool: SamplePool, cfg: ScanBConfig, constants: VarianceConstants, stream: Iterable, b: float, t_max: int) -> int:
    """First ``t`` in ``[B, t_max]`` with ``Z_t > b``, else ``t_max + 1``."""
    state = scanb_init(pool, cfg, constants)
    for t, y in enumerate(stream, start=1):
        if t > t_max:
            break
        z = scanb_step(state, y)
        if z is not None and z > b:
            return t
    else:
        if state.t < t_max:
            raise InputError(f"stream ended after {state.t} points, before t_max={t_max}")
    return t_max + 1
