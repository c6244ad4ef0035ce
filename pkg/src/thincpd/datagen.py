"""Seeded samplers for pre- and post-change distributions.

Randomness comes from numpy's PCG64 bit generator keyed by
:class:`numpy.random.SeedSequence`.  Sub-seeds are derived with
:func:`derive_seed`, which hashes ``(seed, *keys)`` through the SeedSequence
spawn-key mechanism, so draws for one trial never depend on what any other
trial consumed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError

KINDS = ("gaussian_std", "gaussian_mixture", "laplace_iid")

# weight of the shifted N(mu 1, sigma^2 I) component
MIXTURE_SHIFT_WEIGHT = 0.7

STREAM_CHUNK = 256


def derive_seed(seed: int, *keys: int) -> int:
    """Mix a master seed with integer keys into a 63-bit sub-seed."""
    if int(seed) < 0 or any(int(k) < 0 for k in keys):
        raise InputError("seeds and seed keys must be non-negative integers")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))))


@dataclass(frozen=True)
class DistributionSpec:
    """A distribution on R^d.

    ``mu`` and ``sigma`` are the location and scale of the shifted mixture
    component (``gaussian_mixture``) or of each Laplace coordinate
    (``laplace_iid``, variance ``2 sigma^2``).  Ignored for ``gaussian_std``.
    """

    kind: str = "gaussian_std"
    d: int = 1
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown distribution kind {self.kind!r}; expected one of {KINDS}")
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise InputError(f"dimension d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        mu, sigma = float(self.mu), float(self.sigma)
        if not math.isfinite(mu):
            raise InputError(f"mu must be finite, got {self.mu!r}")
        if not (math.isfinite(sigma) and sigma > 0):
            raise InputError(f"sigma must be positive and finite, got {self.sigma!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def to_dict(self) -> dict:
        return asdict(self)


def sample(spec: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws from ``spec`` as an ``(n, d)`` array."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InputError(f"sample size must be a positive integer, got {n!r}")
    n = int(n)
    rng = rng_for(seed)
    d = spec.d
    if spec.kind == "gaussian_std":
        return rng.standard_normal((n, d))
    if spec.kind == "gaussian_mixture":
        shifted = rng.random(n) < MIXTURE_SHIFT_WEIGHT
        z = rng.standard_normal((n, d))
        return np.where(shifted[:, None], spec.mu + spec.sigma * z, z)
    # Laplace by inverse CDF
    u = rng.random((n, d)) - 0.5
    return spec.mu - spec.sigma * np.sign(u) * np.log1p(-2.0 * np.abs(u))


class Stream:
    """Lazily generated i.i.d. stream, produced in fixed seeded chunks.

    Point ``t`` (1-based) depends only on ``(spec, seed, t)``, never on how
    far the stream was read before.
    """

    def __init__(self, spec: DistributionSpec, seed: int, chunk: int = STREAM_CHUNK):
        self.spec = spec
        self.seed = int(seed)
        self.chunk = int(chunk)
        self._chunks: list[np.ndarray] = []

    def _chunk(self, j: int) -> np.ndarray:
        while len(self._chunks) <= j:
            self._chunks.append(sample(self.spec, self.chunk, derive_seed(self.seed, len(self._chunks))))
        return self._chunks[j]

    def __getitem__(self, t: int) -> np.ndarray:
        """The ``t``-th point, 1-based."""
        j, i = divmod(t - 1, self.chunk)
        return self._chunk(j)[i]

    def take(self, n: int) -> np.ndarray:
        nchunks = -(-n // self.chunk)
        return np.concatenate([self._chunk(j) for j in range(nchunks)])[:n]

    def __iter__(self):
        # no caching: long censored runs would otherwise pin every chunk
        j = 0
        while True:
            yield from sample(self.spec, self.chunk, derive_seed(self.seed, j))
            j += 1
