"""Kernel CUSUM detector.

One reference point is drawn (with replacement) from the pool at every step.
On even steps the statistic moves by the two-point h-statistic minus the
drift ``delta`` and is floored at zero; on odd steps it is unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .datagen import rng_for
from .errors import InputError
from .kernel import Kernel, as_point, h_stat
from .thinning import SamplePool

DEFAULT_DELTA = 1 / 50
# reference indices are drawn in blocks of this size
_DRAW_BLOCK = 256


@dataclass(frozen=True)
class KcusumConfig:
    kernel: Kernel
    delta: float = DEFAULT_DELTA
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise InputError(f"delta must be positive, got {self.delta!r}")


@dataclass
class KcusumState:
    cfg: KcusumConfig
    pool_size: int
    S: float = 0.0
    t: int = 0
    pending_y: Optional[np.ndarray] = None
    x_prev: Optional[np.ndarray] = None
    _rng: np.random.Generator = field(default=None, repr=False)
    _draws: np.ndarray = field(default=None, repr=False)
    _pos: int = 0

    def __post_init__(self):
        self._rng = rng_for(self.cfg.seed)
        self._draws = np.empty(0, dtype=np.int64)

    def draw_index(self) -> int:
        if self._pos >= self._draws.size:
            self._draws = self._rng.integers(0, self.pool_size, size=_DRAW_BLOCK)
            self._pos = 0
        i = int(self._draws[self._pos])
        self._pos += 1
        return i


def kcusum_init(pool: SamplePool, cfg: KcusumConfig) -> KcusumState:
    return KcusumState(cfg=cfg, pool_size=len(pool))


def kcusum_step(state: KcusumState, pool: SamplePool, y) -> float:
    """Advance one step and return ``S_t``."""
    y = as_point(y, "y")
    if y.size != pool.dim:
        raise InputError(f"dimension mismatch: stream point has {y.size}, pool has {pool.dim}")
    state.t += 1
    x = pool.points[state.draw_index()]
    if state.t % 2 == 1:
        state.x_prev, state.pending_y = x, y
        return state.S
    inc = h_stat(state.cfg.kernel, state.x_prev, x, state.pending_y, y)
    state.S = max(0.0, state.S + inc - state.cfg.delta)
    state.x_prev = state.pending_y = None
    return state.S


def kcusum_run(pool: SamplePool, cfg: KcusumConfig, stream: Iterable, b: float, t_max: int) -> int:
    """First ``t <= t_max`` with ``S_t > b``, else ``t_max + 1``."""
    state = kcusum_init(pool, cfg)
    for t, y in enumerate(stream, start=1):
        if t > t_max:
            break
        if kcusum_step(state, pool, y) > b:
            return t
    else:
        if state.t < t_max:
            raise InputError(f"stream ended after {state.t} points, before t_max={t_max}")
    return t_max + 1
