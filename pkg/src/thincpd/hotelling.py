"""Hotelling's T^2 scan over hypothetical change-points.

For candidate ``r`` the data split into ``U = history + Y_1..Y_{r-1}`` and
``V = Y_r..Y_t``; the statistic is the largest two-sample T^2 over the last
``window`` candidates, using the pooled covariance with ``M + t - 2``
degrees of freedom.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import DegenerateCovarianceError, InputError
from .kernel import as_point, as_points
from .thinning import SamplePool

# relative ridge: eps = AUTO_RIDGE * trace(cov) / d
AUTO_RIDGE = 1e-8


@dataclass(frozen=True)
class HotellingConfig:
    """``ridge=None`` selects the relative ridge ``1e-8 * trace(cov) / d``."""

    window: int = 50
    ridge: Optional[float] = None

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 2:
            raise InputError(f"window must be an integer >= 2, got {self.window!r}")
        if self.ridge is not None and not (math.isfinite(self.ridge) and self.ridge >= 0):
            raise InputError(f"ridge must be non-negative, got {self.ridge!r}")


def _ridge(cov: np.ndarray, ridge: Optional[float]) -> np.ndarray:
    d = cov.shape[-1]
    if ridge is None:
        eps = AUTO_RIDGE * np.trace(cov, axis1=-2, axis2=-1) / d
    else:
        eps = np.full(cov.shape[:-2], float(ridge))
    return cov + eps[..., None, None] * np.eye(d)


def ht2(U, V, eps: float) -> float:
    """Two-sample T^2 statistic with ridge ``eps`` on the pooled covariance."""
    U = as_points(U, "U")
    V = as_points(V, "V")
    nu, nv = len(U), len(V)
    if U.shape[1] != V.shape[1]:
        raise InputError(f"dimension mismatch: {U.shape[1]} vs {V.shape[1]}")
    if nu + nv < 3:
        raise InputError("pooled covariance needs |U| + |V| >= 3")
    if not eps >= 0:
        raise InputError(f"ridge must be non-negative, got {eps!r}")
    ubar, vbar = U.mean(axis=0), V.mean(axis=0)
    scatter = (U - ubar).T @ (U - ubar) + (V - vbar).T @ (V - vbar)
    A = scatter / (nu + nv - 2) + eps * np.eye(U.shape[1])
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(A).min())
        raise DegenerateCovarianceError(
            f"regularized pooled covariance is not positive definite (smallest eigenvalue {smallest:.3g})"
        ) from None
    w = np.linalg.solve(L, ubar - vbar)
    return nu * nv / (nu + nv) * float(w @ w)


@dataclass
class HotellingState:
    """Running sums over history plus stream, centred at the history mean.

    Only the last ``window + 1`` stream points are kept; the candidate
    suffix sums are rebuilt from them at each step.
    """

    cfg: HotellingConfig
    history_size: int
    center: np.ndarray
    total_sum: np.ndarray  # sum of centred points
    total_scatter: np.ndarray  # sum of centred outer products
    t: int = 0
    skipped: int = 0
    _recent: deque = field(default=None, repr=False)

    def __post_init__(self):
        self._recent = deque(maxlen=self.cfg.window + 1)

    @property
    def dim(self) -> int:
        return self.center.size

    def candidates(self) -> np.ndarray:
        """Candidate change-points ``r``, newest first."""
        lo = max(1, self.t - self.cfg.window)
        return np.arange(self.t - 1, lo - 1, -1)

    def statistic(self) -> Optional[float]:
        if self.t < 2:
            return None
        n = self.history_size + self.t
        recent = np.asarray(self._recent)[::-1]  # Y_t, Y_{t-1}, ...
        sv = np.cumsum(recent, axis=0)[1:]
        qv = np.cumsum(recent[:, :, None] * recent[:, None, :], axis=0)[1:]
        r = self.candidates()
        nv = (self.t - r + 1).astype(float)
        sv, qv = sv[: r.size], qv[: r.size]
        nu = n - nv
        su = self.total_sum - sv
        qu = self.total_scatter - qv
        scatter = (
            qu - su[:, :, None] * su[:, None, :] / nu[:, None, None]
            + qv - sv[:, :, None] * sv[:, None, :] / nv[:, None, None]
        )
        A = _ridge(scatter / (n - 2), self.cfg.ridge)
        diff = su / nu[:, None] - sv / nv[:, None]
        coef = nu * nv / n
        try:
            L = np.linalg.cholesky(A)
            ok = np.ones(r.size, dtype=bool)
        except np.linalg.LinAlgError:
            L = np.zeros_like(A)
            ok = np.zeros(r.size, dtype=bool)
            for i in range(r.size):
                try:
                    L[i] = np.linalg.cholesky(A[i])
                    ok[i] = True
                except np.linalg.LinAlgError:
                    self.skipped += 1
            if not ok.any():
                return None
        w = np.linalg.solve(L[ok], diff[ok][:, :, None])[:, :, 0]
        return float(np.max(coef[ok] * np.einsum("ij,ij->i", w, w)))


def hotelling_init(pool: SamplePool, cfg: HotellingConfig) -> HotellingState:
    X = pool.points
    center = X.mean(axis=0)
    Z = X - center
    return HotellingState(
        cfg=cfg,
        history_size=len(X),
        center=center,
        total_sum=Z.sum(axis=0),
        total_scatter=Z.T @ Z,
    )


def hotelling_step(state: HotellingState, y) -> Optional[float]:
    """Append ``y`` and return ``max_r HT^2_t(r)`` (``None`` while ``t < 2``)."""
    y = as_point(y, "y")
    if y.size != state.dim:
        raise InputError(f"dimension mismatch: stream point has {y.size}, pool has {state.dim}")
    z = y - state.center
    state.t += 1
    state.total_sum = state.total_sum + z
    state.total_scatter = state.total_scatter + np.outer(z, z)
    state._recent.append(z)
    return state.statistic()


def hotelling_run(pool: SamplePool, cfg: HotellingConfig, stream: Iterable, b: float, t_max: int) -> int:
    """First ``t <= t_max`` with the scan statistic above ``b``, else ``t_max + 1``."""
    state = hotelling_init(pool, cfg)
    for t, y in enumerate(stream, start=1):
        if t > t_max:
            break
        s = hotelling_step(state, y)
        if s is not None and s > b:
            return t
    else:
        if state.t < t_max:
            raise InputError(f"stream ended after {state.t} points, before t_max={t_max}")
    return t_max + 1
