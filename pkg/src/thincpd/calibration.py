"""Monte Carlo estimation of run lengths and threshold calibration.

Trial ``i`` of an ensemble seeded by ``seed`` uses the detector seed
``derive_seed(seed, i, 0)`` and the stream seed ``derive_seed(seed, i, 1)``,
independent of the threshold.  These common random numbers make every
trial's stopping time nondecreasing in ``b``, which is what lets
:func:`calibrate` bisect exactly.

Censored runs (no alarm by ``t_max``) count as ``t_max + 1``.
"""

from __future__ import annotations

import bisect
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

import numpy as np

from .datagen import DistributionSpec, Stream, derive_seed
from .errors import CalibrationError, InputError
from .hotelling import HotellingConfig, hotelling_init, hotelling_step
from .kcusum import KcusumConfig, kcusum_init, kcusum_step
from .scanb import ScanBConfig, VarianceConstants, estimate_constants, scanb_init, scanb_step
from .thinning import SamplePool

DETECTORS = ("scanb", "kcusum", "hotelling")
POOL_MODES = ("raw", "thinned")
_CONFIG_TYPES = {"scanb": ScanBConfig, "kcusum": KcusumConfig, "hotelling": HotellingConfig}

B_MIN, B_MAX = -16.0, 1e6
CALIBRATION_TOL = 0.10
MAX_BISECTIONS = 40

Sampler = Union[DistributionSpec, Callable[[int], Iterable]]


@dataclass(frozen=True)
class DetectorSpec:
    """A detector kind, its configuration and which pool it runs on.

    ``constants`` optionally pins the Scan-B variance constants; when absent
    they are estimated from the pool the detector is given.
    """

    kind: str
    config: object
    pool_mode: str = "raw"
    constants: Optional[VarianceConstants] = None

    def __post_init__(self):
        if self.kind not in DETECTORS:
            raise InputError(f"unknown detector {self.kind!r}; expected one of {DETECTORS}")
        if not isinstance(self.config, _CONFIG_TYPES[self.kind]):
            raise InputError(f"{self.kind} detector needs a {_CONFIG_TYPES[self.kind].__name__}")
        if self.pool_mode not in POOL_MODES:
            raise InputError(f"pool_mode must be one of {POOL_MODES}, got {self.pool_mode!r}")

    @property
    def min_stop(self) -> int:
        """Earliest time the statistic exists."""
        if self.kind == "scanb":
            return self.config.B
        return 1 if self.kind == "kcusum" else 2


@dataclass(frozen=True)
class RunLengthEstimate:
    mean: float
    stderr: float
    trials: int
    censored: int
    times: tuple = field(default=(), repr=False, compare=False)

    @classmethod
    def from_times(cls, times, t_max: int) -> "RunLengthEstimate":
        arr = np.asarray(times, dtype=float)
        n = arr.size
        if n < 1:
            raise InputError("need at least one trial")
        # fixed reduction order: math.fsum over trial-index order
        mean = math.fsum(arr) / n
        stderr = math.sqrt(math.fsum((arr - mean) ** 2) / (n - 1) / n) if n > 1 else 0.0
        return cls(
            mean=mean,
            stderr=stderr,
            trials=n,
            censored=int(np.sum(arr > t_max)),
            times=tuple(int(x) for x in arr),
        )


def _check_pool(spec: DetectorSpec, pool: SamplePool):
    if pool.provenance != spec.pool_mode:
        raise InputError(f"{spec.pool_mode} detector was given a {pool.provenance} pool")


def resolve_constants(spec: DetectorSpec, pool: SamplePool) -> DetectorSpec:
    """Fill in Scan-B variance constants estimated from ``pool`` if missing."""
    if spec.kind != "scanb" or spec.constants is not None:
        return spec
    cfg = spec.config
    return dataclasses.replace(spec, constants=estimate_constants(cfg.kernel, pool, cfg))


def make_stepper(spec: DetectorSpec, pool: SamplePool, seed: int) -> Callable:
    """A fresh detector for one stream: ``step(y) -> statistic or None``."""
    cfg = spec.config
    if spec.kind == "scanb":
        if spec.constants is None:
            raise InputError("Scan-B stepper needs resolved variance constants")
        state = scanb_init(pool, dataclasses.replace(cfg, seed=seed), spec.constants)
        return lambda y: scanb_step(state, y)
    if spec.kind == "kcusum":
        state = kcusum_init(pool, dataclasses.replace(cfg, seed=seed))
        return lambda y: kcusum_step(state, pool, y)
    state = hotelling_init(pool, cfg)
    return lambda y: hotelling_step(state, y)


def make_stream(sampler: Sampler, seed: int) -> Iterable:
    if isinstance(sampler, DistributionSpec):
        return Stream(sampler, seed)
    return sampler(seed)


def trial_seeds(seed: int, i: int) -> tuple[int, int]:
    return derive_seed(seed, i, 0), derive_seed(seed, i, 1)


class Trajectory:
    """One common-random-number trial, extended lazily.

    Keeps the running maximum of the statistic so the stopping time for any
    threshold is a binary search over what has been simulated, and only
    thresholds beyond the running max simulate further.
    """

    def __init__(self, spec: DetectorSpec, pool: SamplePool, sampler: Sampler, seed: int, i: int, t_max: int):
        det_seed, stream_seed = trial_seeds(seed, i)
        self._step = make_stepper(spec, pool, det_seed)
        self._stream = iter(make_stream(sampler, stream_seed))
        self.t_max = t_max
        self.runmax: list[float] = []

    def stopping_time(self, b: float) -> int:
        rm = self.runmax
        if rm and rm[-1] > b:
            return bisect.bisect_right(rm, b) + 1
        cur = rm[-1] if rm else -math.inf
        while len(rm) < self.t_max:
            try:
                y = next(self._stream)
            except StopIteration:
                raise InputError(f"stream ended after {len(rm)} points, before t_max={self.t_max}") from None
            z = self._step(y)
            if z is not None and z > cur:
                cur = z
            rm.append(cur)
            if cur > b:
                return len(rm)
        return self.t_max + 1


def _trial_times(args) -> list[int]:
    spec, pool, sampler, b, t_max, seed, indices = args
    return [Trajectory(spec, pool, sampler, seed, i, t_max).stopping_time(b) for i in indices]


def _run_ensemble(spec, pool, sampler, b, trials, t_max, seed, workers) -> RunLengthEstimate:
    if int(trials) != trials or trials < 1:
        raise InputError(f"trials must be a positive integer, got {trials!r}")
    if int(t_max) != t_max or t_max < 1:
        raise InputError(f"t_max must be a positive integer, got {t_max!r}")
    if spec.kind == "scanb" and t_max < spec.config.B:
        raise InputError(f"t_max={t_max} is below the Scan-B block size B={spec.config.B}")
    _check_pool(spec, pool)
    spec = resolve_constants(spec, pool)
    workers = max(1, int(workers))
    if workers == 1:
        times = _trial_times((spec, pool, sampler, b, t_max, seed, range(trials)))
    else:
        chunks = [range(trials)[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_trial_times, [(spec, pool, sampler, b, t_max, seed, c) for c in chunks]))
        times = [0] * trials
        for c, part in zip(chunks, parts):
            for i, t in zip(c, part):
                times[i] = t
    return RunLengthEstimate.from_times(times, t_max)


def estimate_arl(spec: DetectorSpec, pool: SamplePool, null_sampler: Sampler, b: float, trials: int, t_max: int, seed: int, workers: int = 1) -> RunLengthEstimate:
    """Mean stopping time over ``trials`` seeded streams drawn from the null."""
    return _run_ensemble(spec, pool, null_sampler, b, trials, t_max, seed, workers)


def estimate_edd(spec: DetectorSpec, pool: SamplePool, post_sampler: Sampler, b: float, trials: int, t_max: int, seed: int, workers: int = 1) -> RunLengthEstimate:
    """Mean stopping time when every stream point comes from the post-change law."""
    return _run_ensemble(spec, pool, post_sampler, b, trials, t_max, seed, workers)


@dataclass(frozen=True)
class Calibration:
    b: float
    arl: RunLengthEstimate
    evaluations: int


def calibrate(spec: DetectorSpec, pool: SamplePool, null_sampler: Sampler, target_arl: float, trials: int, t_max: int, seed: int) -> Calibration:
    """Find ``b`` whose ARL estimate is within 10% of ``target_arl``.

    Brackets by doubling the step away from ``b = 1`` (limits ``[-16, 1e6]``),
    then bisects for at most 40 steps.  All evaluations share one
    common-random-number ensemble.
    """
    lower = spec.config.B if spec.kind == "scanb" else 1
    if not (lower < target_arl <= t_max / 2):
        raise InputError(f"target ARL {target_arl} must lie in ({lower}, t_max/2 = {t_max / 2}]")
    if int(trials) != trials or trials < 1:
        raise InputError(f"trials must be a positive integer, got {trials!r}")
    _check_pool(spec, pool)
    spec = resolve_constants(spec, pool)
    ensemble = [Trajectory(spec, pool, null_sampler, seed, i, t_max) for i in range(trials)]
    evals = 0

    def arl(b: float) -> RunLengthEstimate:
        nonlocal evals
        evals += 1
        return RunLengthEstimate.from_times([tr.stopping_time(b) for tr in ensemble], t_max)

    def close(est: RunLengthEstimate) -> bool:
        return abs(est.mean - target_arl) <= CALIBRATION_TOL * target_arl

    b = 1.0
    est = arl(b)
    if close(est):
        return Calibration(b, est, evals)
    step = 1.0
    if est.mean < target_arl:
        lo, hi = b, None
        while hi is None:
            cand = min(b + step, B_MAX)
            est = arl(cand)
            if close(est):
                return Calibration(cand, est, evals)
            if est.mean >= target_arl:
                hi = cand
            elif cand >= B_MAX:
                raise CalibrationError(f"ARL stays below {target_arl} up to b = {B_MAX:g} (last {est.mean:.1f})")
            else:
                lo = cand
            step *= 2
    else:
        lo, hi = None, b
        while lo is None:
            cand = max(b - step, B_MIN)
            est = arl(cand)
            if close(est):
                return Calibration(cand, est, evals)
            if est.mean < target_arl:
                lo = cand
            elif cand <= B_MIN:
                raise CalibrationError(f"ARL stays above {target_arl} down to b = {B_MIN:g} (last {est.mean:.1f})")
            else:
                hi = cand
            step *= 2
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        est = arl(mid)
        if close(est):
            break
        if est.mean < target_arl:
            lo = mid
        else:
            hi = mid
    return Calibration(mid, est, evals)


def calibrate_threshold(spec: DetectorSpec, pool: SamplePool, null_sampler: Sampler, target_arl: float, trials: int, t_max: int, seed: int) -> float:
    """Threshold ``b`` calibrated to ``target_arl``; see :func:`calibrate`."""
    return calibrate(spec, pool, null_sampler, target_arl, trials, t_max, seed).b
