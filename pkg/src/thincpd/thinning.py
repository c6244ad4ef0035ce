"""Optimal sub-sampling of the history pool by greedy kernel herding.

The selection minimizes the squared MMD between the chosen subset and the
full pool one point at a time, without replacement.  Progress is reported as
the biased (V-statistic) MMD^2, which is always non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError
from .kernel import Kernel, as_points

PROVENANCES = ("raw", "thinned")

_CHUNK = 1024


@dataclass(frozen=True)
class SamplePool:
    """History observations, one point per row."""

    points: np.ndarray
    provenance: str = "raw"
    source_seed: Optional[int] = None

    def __post_init__(self):
        pts = as_points(self.points, "pool")
        if len(pts) < 1:
            raise InputError("a pool needs at least one point")
        if self.provenance not in PROVENANCES:
            raise InputError(f"unknown provenance {self.provenance!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class ThinResult:
    """Outcome of :func:`thin`.

    ``objective_value`` and every ``trace`` entry are the biased V-statistic
    MMD^2 between the subset selected so far and the full pool.
    """

    selected_indices: np.ndarray
    objective_value: float
    trace: np.ndarray = field(repr=False)

    def subset(self, pool: SamplePool) -> SamplePool:
        """The thinned pool, in selection order."""
        return SamplePool(pool.points[self.selected_indices], "thinned", pool.source_seed)


def _gram_sums(k: Kernel, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row sums of ``k.gram(A, B)`` without holding the full matrix."""
    out = np.empty(len(A))
    for start in range(0, len(A), _CHUNK):
        out[start:start + _CHUNK] = k.gram(A[start:start + _CHUNK], B).sum(axis=1)
    return out


def thin(k: Kernel, pool: SamplePool, m: int) -> ThinResult:
    """Greedily select ``m`` distinct pool points to minimize MMD^2 to the pool.

    With ``s - 1`` points already chosen, step ``s`` picks the unselected
    candidate ``c`` minimizing::

        (1/s) * sum_{j chosen} k(x_c, x_j) - (1/M) * sum_i k(x_c, x_i)

    which is the exact greedy minimizer of the V-statistic MMD^2 after adding
    ``c``.  Ties go to the lowest index.  Deterministic; no randomness.

    Memory is O(M); each step evaluates one kernel column against the pool.
    """
    if pool.provenance != "raw":
        raise InputError("thin expects a raw pool")
    M = len(pool)
    m = int(m)
    if m > M:
        raise InputError(f"thin size m={m} exceeds pool size M={M}")
    if m < 2:
        raise InputError(f"thin size m={m} must be at least 2")
    X = pool.points
    mean_sim = _gram_sums(k, X, X) / M
    pool_mean = float(mean_sim.mean())

    acc = np.zeros(M)  # sum of k(x_c, x_j) over chosen j
    taken = np.zeros(M, dtype=bool)
    indices = np.empty(m, dtype=np.int64)
    trace = np.empty(m)
    ss = 0.0  # sum_{i,j chosen} k(x_i, x_j)
    sp = 0.0  # sum_{i chosen} mean_j k(x_i, x_j)
    for s in range(1, m + 1):
        score = acc / s - mean_sim
        score[taken] = np.inf
        c = int(np.argmin(score))
        col = k.column(X, X[c])
        ss += 2.0 * acc[c] + col[c]
        sp += mean_sim[c]
        acc += col
        taken[c] = True
        indices[s - 1] = c
        trace[s - 1] = ss / s**2 + pool_mean - 2.0 * sp / s
    return ThinResult(selected_indices=indices, objective_value=float(trace[-1]), trace=trace)


def subset_mmd(k: Kernel, subset, pool) -> float:
    """V-statistic MMD^2 between the empirical measures of ``subset`` and ``pool``."""
    S = as_points(subset.points if isinstance(subset, SamplePool) else subset, "subset")
    P = as_points(pool.points if isinstance(pool, SamplePool) else pool, "pool")
    if S.shape[1] != P.shape[1]:
        raise InputError(f"dimension mismatch: {S.shape[1]} vs {P.shape[1]}")
    ss = _gram_sums(k, S, S).sum() / len(S) ** 2
    pp = _gram_sums(k, P, P).sum() / len(P) ** 2
    sp = _gram_sums(k, S, P).sum() / (len(S) * len(P))
    return float(ss + pp - 2.0 * sp)
