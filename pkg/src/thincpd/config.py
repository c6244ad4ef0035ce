"""Experiment configuration files.

A config is a TOML document with the sections below; every key is optional
unless marked required, and unknown sections or keys are rejected::

    [experiment]
    seed = 0                 # master seed
    trials = 200             # Monte Carlo trials per calibration / EDD estimate
    t_max = 10000            # censoring horizon; default 20 * max(target_arl)
    target_arl = [500]       # required
    detectors = ["scanb"]    # required; any of scanb, kcusum, hotelling
    workers = 1              # cells run in parallel processes when > 1
    out = "bench.csv"

    [pool]
    size = 10000             # M, history points drawn from pre_change
    thin_size = 2500         # m, default size // 4
    file = "pool.csv"        # optional; load the history pool instead of sampling

    [pre_change]             # and [post_change]
    kind = "gaussian_std"    # gaussian_std | gaussian_mixture | laplace_iid
    d = 20
    mu = 0.0
    sigma = 1.0

    [kernel]
    family = "rbf"           # rbf | laplace
    bandwidth = "median"     # or a positive number

    [scanb]
    N = 15
    B = 50
    n_tuples = 10000
    constants_pool = "same"  # same | raw
    pool_modes = ["raw", "thinned"]

    [kcusum]
    delta = 0.02
    pool_modes = ["raw", "thinned"]

    [hotelling]
    window = 50
    ridge = "auto"           # or a non-negative number
    pool_modes = ["raw", "thinned"]
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .calibration import DETECTORS, POOL_MODES
from .datagen import DistributionSpec
from .errors import InputError
from .kernel import FAMILIES
from .scanb import CONSTANTS_POOLS, MIN_TUPLES

DETECTOR_DEFAULTS = {
    "scanb": {"N": 15, "B": 50, "n_tuples": 10_000, "constants_pool": "same", "pool_modes": ["raw", "thinned"]},
    "kcusum": {"delta": 1 / 50, "pool_modes": ["raw", "thinned"]},
    "hotelling": {"window": 50, "ridge": "auto", "pool_modes": ["raw", "thinned"]},
}
_SECTIONS = {"experiment", "pool", "pre_change", "post_change", "kernel", *DETECTORS}
_KEYS = {
    "experiment": {"seed", "trials", "t_max", "target_arl", "detectors", "workers", "out"},
    "pool": {"size", "thin_size", "file"},
    "pre_change": {"kind", "d", "mu", "sigma"},
    "post_change": {"kind", "d", "mu", "sigma"},
    "kernel": {"family", "bandwidth"},
    **{name: set(defaults) for name, defaults in DETECTOR_DEFAULTS.items()},
}


def _int(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise InputError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def _real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InputError(f"{name} must be a finite number, got {value!r}")
    return float(value)


def _modes(value, name: str) -> tuple:
    if not isinstance(value, list) or not value or any(v not in POOL_MODES for v in value):
        raise InputError(f"{name} must be a non-empty list drawn from {POOL_MODES}, got {value!r}")
    if len(set(value)) != len(value):
        raise InputError(f"{name} has duplicates: {value!r}")
    return tuple(value)


@dataclass(frozen=True)
class ExperimentConfig:
    pre_change: DistributionSpec
    post_change: DistributionSpec
    target_arl: tuple
    detectors: tuple
    detector_params: dict = field(default_factory=dict)
    seed: int = 0
    trials: int = 200
    t_max: Optional[int] = None
    workers: int = 1
    out: str = "bench.csv"
    pool_size: int = 10_000
    thin_size: Optional[int] = None
    pool_file: Optional[str] = None
    kernel_family: str = "rbf"
    bandwidth: Union[str, float] = "median"

    def __post_init__(self):
        if self.t_max is None:
            object.__setattr__(self, "t_max", int(20 * max(self.target_arl)))
        if self.thin_size is None:
            object.__setattr__(self, "thin_size", self.pool_size // 4)

    @property
    def needs_thinning(self) -> bool:
        return any("thinned" in self.detector_params[d]["pool_modes"] for d in self.detectors)

    def to_dict(self) -> dict:
        doc = {
            "experiment": {
                "seed": self.seed,
                "trials": self.trials,
                "t_max": self.t_max,
                "target_arl": list(self.target_arl),
                "detectors": list(self.detectors),
                "workers": self.workers,
                "out": self.out,
            },
            "pool": {"size": self.pool_size, "thin_size": self.thin_size},
            "pre_change": self.pre_change.to_dict(),
            "post_change": self.post_change.to_dict(),
            "kernel": {"family": self.kernel_family, "bandwidth": self.bandwidth},
        }
        if self.pool_file is not None:
            doc["pool"]["file"] = self.pool_file
        for name in self.detectors:
            params = dict(self.detector_params[name])
            params["pool_modes"] = list(params["pool_modes"])
            doc[name] = params
        return doc

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _distribution(section: dict, name: str) -> DistributionSpec:
    params = dict(section)
    if "d" in params:
        params["d"] = _int(params["d"], f"{name}.d", 1)
    for key in ("mu", "sigma"):
        if key in params:
            params[key] = _real(params[key], f"{name}.{key}")
    return DistributionSpec(**params)


def _detector_params(name: str, section: dict) -> dict:
    params = {**DETECTOR_DEFAULTS[name], **section}
    params["pool_modes"] = _modes(params["pool_modes"], f"{name}.pool_modes")
    if name == "scanb":
        _int(params["N"], "scanb.N", 1)
        _int(params["B"], "scanb.B", 2)
        _int(params["n_tuples"], "scanb.n_tuples", MIN_TUPLES)
        if params["constants_pool"] not in CONSTANTS_POOLS:
            raise InputError(f"scanb.constants_pool must be one of {CONSTANTS_POOLS}")
    elif name == "kcusum":
        if _real(params["delta"], "kcusum.delta") <= 0:
            raise InputError("kcusum.delta must be positive")
        params["delta"] = float(params["delta"])
    else:
        _int(params["window"], "hotelling.window", 2)
        if params["ridge"] != "auto" and _real(params["ridge"], "hotelling.ridge") < 0:
            raise InputError("hotelling.ridge must be 'auto' or non-negative")
    return params


def from_dict(doc: dict) -> ExperimentConfig:
    """Validate a parsed config document; every problem raises InputError."""
    unknown = set(doc) - _SECTIONS
    if unknown:
        raise InputError(f"unknown config section(s): {sorted(unknown)}")
    for name, section in doc.items():
        if not isinstance(section, dict):
            raise InputError(f"[{name}] must be a table")
        extra = set(section) - _KEYS[name]
        if extra:
            raise InputError(f"unknown key(s) in [{name}]: {sorted(extra)}")
    exp = doc.get("experiment", {})
    for key in ("target_arl", "detectors"):
        if key not in exp:
            raise InputError(f"[experiment] is missing required key {key!r}")
    for key in ("pre_change", "post_change"):
        if key not in doc:
            raise InputError(f"missing required section [{key}]")

    targets = exp["target_arl"]
    if not isinstance(targets, list) or not targets:
        raise InputError("experiment.target_arl must be a non-empty list")
    targets = tuple(_real(a, "experiment.target_arl entry") for a in targets)
    if any(a <= 1 for a in targets):
        raise InputError("every target ARL must exceed 1")
    detectors = exp["detectors"]
    if not isinstance(detectors, list) or not detectors or any(d not in DETECTORS for d in detectors):
        raise InputError(f"experiment.detectors must be a non-empty list drawn from {DETECTORS}")
    if len(set(detectors)) != len(detectors):
        raise InputError("experiment.detectors has duplicates")
    stray = [d for d in DETECTORS if d in doc and d not in detectors]
    if stray:
        raise InputError(f"section(s) {stray} configured but not listed in experiment.detectors")

    pre = _distribution(doc["pre_change"], "pre_change")
    post = _distribution(doc["post_change"], "post_change")
    if pre.d != post.d:
        raise InputError(f"pre_change.d={pre.d} and post_change.d={post.d} differ")

    pool = doc.get("pool", {})
    pool_size = _int(pool.get("size", 10_000), "pool.size", 2)
    thin_size = _int(pool.get("thin_size", pool_size // 4), "pool.thin_size", 2)
    pool_file = pool.get("file")
    if pool_file is not None and not isinstance(pool_file, str):
        raise InputError("pool.file must be a path string")
    if pool_file is None and thin_size > pool_size:
        raise InputError(f"pool.thin_size={thin_size} exceeds pool.size={pool_size}")

    kernel = doc.get("kernel", {})
    family = kernel.get("family", "rbf")
    if family not in FAMILIES:
        raise InputError(f"kernel.family must be one of {FAMILIES}, got {family!r}")
    bandwidth = kernel.get("bandwidth", "median")
    if bandwidth != "median" and _real(bandwidth, "kernel.bandwidth") <= 0:
        raise InputError("kernel.bandwidth must be 'median' or positive")

    params = {name: _detector_params(name, doc.get(name, {})) for name in detectors}
    trials = _int(exp.get("trials", 200), "experiment.trials", 1)
    t_max = exp.get("t_max")
    if t_max is not None:
        t_max = _int(t_max, "experiment.t_max", 2)
    cfg = ExperimentConfig(
        pre_change=pre,
        post_change=post,
        target_arl=targets,
        detectors=tuple(detectors),
        detector_params=params,
        seed=_int(exp.get("seed", 0), "experiment.seed", 0),
        trials=trials,
        t_max=t_max,
        workers=_int(exp.get("workers", 1), "experiment.workers", 1),
        out=str(exp.get("out", "bench.csv")),
        pool_size=pool_size,
        thin_size=thin_size,
        pool_file=pool_file,
        kernel_family=family,
        bandwidth=bandwidth,
    )
    validate_horizon(cfg)
    return cfg


def validate_horizon(cfg: ExperimentConfig):
    """Check every target ARL fits the censoring horizon and block sizes."""
    for name in cfg.detectors:
        p = cfg.detector_params[name]
        lower = p["B"] if name == "scanb" else 1
        for a in cfg.target_arl:
            if not lower < a <= cfg.t_max / 2:
                raise InputError(f"{name}: target ARL {a:g} must lie in ({lower}, t_max/2 = {cfg.t_max / 2:g}]")
        if name == "scanb" and cfg.pool_file is None:
            need = p["N"] * p["B"]
            for mode in p["pool_modes"]:
                size = cfg.thin_size if mode == "thinned" else cfg.pool_size
                if size < need:
                    raise InputError(f"scanb needs N*B = {need} pool points but the {mode} pool has {size}")


def loads(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"config is not valid TOML: {exc}") from None
    return from_dict(doc)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    return loads(text)
