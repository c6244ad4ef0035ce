"""Experiment pipeline: build pools, thin, calibrate on the null, measure EDD.

Sub-seeds are derived from the master seed with
:func:`~thincpd.datagen.derive_seed`:

* ``(master, 0)`` samples the raw pool, ``(master, 1)`` seeds the median
  heuristic subset;
* ``(master, 3, detector_index)`` is the detector config seed (Scan-B
  variance constants);
* ``(master, 2, detector_index, target_index)`` is the cell seed written to
  the CSV.  Raw and thinned arms of one cell share it, so they see the same
  streams.  Calibration uses ``(cell, 0)``, EDD estimation ``(cell, 1)``.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .calibration import DetectorSpec, calibrate, estimate_edd, resolve_constants
from .config import ExperimentConfig
from .datagen import DistributionSpec, derive_seed, sample
from .errors import InputError, ThinCPDError
from .hotelling import HotellingConfig
from .io import format_real, read_points
from .kcusum import KcusumConfig
from .kernel import Kernel, median_heuristic
from .scanb import ScanBConfig, estimate_constants
from .thinning import SamplePool, ThinResult, thin

log = logging.getLogger(__name__)

BENCH_COLUMNS = [
    "detector", "pool_mode", "target_arl", "b", "arl_hat", "arl_stderr",
    "edd_hat", "edd_stderr", "censored", "seed", "error",
]
CALIBRATE_COLUMNS = ["detector", "pool_mode", "target_arl", "b", "arl_hat", "arl_stderr", "censored", "seed", "error"]


@dataclass(frozen=True)
class Pools:
    raw: SamplePool
    thinned: Optional[SamplePool]
    kernel: Kernel
    thin_result: Optional[ThinResult] = None

    def for_mode(self, mode: str) -> SamplePool:
        return self.raw if mode == "raw" else self.thinned


def prepare_pools(cfg: ExperimentConfig) -> Pools:
    if cfg.pool_file is not None:
        points = read_points(cfg.pool_file)
        if points.shape[1] != cfg.pre_change.d:
            raise InputError(f"pool file has dimension {points.shape[1]}, config says d={cfg.pre_change.d}")
        raw = SamplePool(points, "raw")
    else:
        seed = derive_seed(cfg.seed, 0)
        raw = SamplePool(sample(cfg.pre_change, cfg.pool_size, seed), "raw", seed)
    if cfg.bandwidth == "median":
        kernel = Kernel(cfg.kernel_family, median_heuristic(raw.points, seed=derive_seed(cfg.seed, 1)))
    else:
        kernel = Kernel(cfg.kernel_family, cfg.bandwidth)
    thinned = result = None
    if cfg.needs_thinning:
        if cfg.thin_size > len(raw):
            raise InputError(f"thin size m={cfg.thin_size} exceeds pool size M={len(raw)}")
        result = thin(kernel, raw, cfg.thin_size)
        thinned = result.subset(raw)
    return Pools(raw, thinned, kernel, result)


def detector_spec(cfg: ExperimentConfig, name: str, mode: str, kernel: Kernel, pools: Pools) -> DetectorSpec:
    p = cfg.detector_params[name]
    seed = derive_seed(cfg.seed, 3, cfg.detectors.index(name))
    if name == "scanb":
        sc = ScanBConfig(kernel, N=p["N"], B=p["B"], seed=seed, n_tuples=p["n_tuples"], constants_pool=p["constants_pool"])
        constants = None
        if sc.constants_pool == "raw":
            constants = estimate_constants(kernel, pools.raw, sc)
        return DetectorSpec("scanb", sc, mode, constants)
    if name == "kcusum":
        return DetectorSpec("kcusum", KcusumConfig(kernel, delta=p["delta"], seed=seed), mode)
    ridge = None if p["ridge"] == "auto" else float(p["ridge"])
    return DetectorSpec("hotelling", HotellingConfig(window=p["window"], ridge=ridge), mode)


@dataclass(frozen=True)
class Cell:
    spec: DetectorSpec
    pool: SamplePool
    pre: DistributionSpec
    post: DistributionSpec
    target_arl: float
    trials: int
    t_max: int
    seed: int
    with_edd: bool = True


def cells(cfg: ExperimentConfig, pools: Pools, with_edd: bool = True) -> list[Cell]:
    out = []
    for di, name in enumerate(cfg.detectors):
        for mode in cfg.detector_params[name]["pool_modes"]:
            spec = detector_spec(cfg, name, mode, pools.kernel, pools)
            for ai, target in enumerate(cfg.target_arl):
                out.append(Cell(
                    spec=spec,
                    pool=pools.for_mode(mode),
                    pre=cfg.pre_change,
                    post=cfg.post_change,
                    target_arl=target,
                    trials=cfg.trials,
                    t_max=cfg.t_max,
                    seed=derive_seed(cfg.seed, 2, di, ai),
                    with_edd=with_edd,
                ))
    return out


def run_cell(cell: Cell) -> dict:
    row = {
        "detector": cell.spec.kind,
        "pool_mode": cell.spec.pool_mode,
        "target_arl": format_real(cell.target_arl),
        "seed": str(cell.seed),
        "error": "",
    }
    try:
        spec = resolve_constants(cell.spec, cell.pool)
        cal = calibrate(spec, cell.pool, cell.pre, cell.target_arl, cell.trials, cell.t_max, derive_seed(cell.seed, 0))
        row.update(b=format_real(cal.b), arl_hat=format_real(cal.arl.mean), arl_stderr=format_real(cal.arl.stderr),
                   censored=str(cal.arl.censored))
        if cell.with_edd:
            edd = estimate_edd(spec, cell.pool, cell.post, cal.b, cell.trials, cell.t_max, derive_seed(cell.seed, 1))
            row.update(edd_hat=format_real(edd.mean), edd_stderr=format_real(edd.stderr), censored=str(edd.censored))
    except ThinCPDError as exc:
        log.warning("cell %s/%s/%g failed: %s", cell.spec.kind, cell.spec.pool_mode, cell.target_arl, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_cells(todo: list[Cell], workers: int = 1) -> list[dict]:
    """Rows in cell order, whatever the worker count."""
    if workers <= 1 or len(todo) <= 1:
        return [run_cell(c) for c in todo]
    with ProcessPoolExecutor(min(workers, len(todo))) as ex:
        return list(ex.map(run_cell, todo))


def run_bench(cfg: ExperimentConfig, with_edd: bool = True) -> list[dict]:
    pools = prepare_pools(cfg)
    return run_cells(cells(cfg, pools, with_edd), cfg.workers)


def summary_table(rows: list[dict], columns: list[str]) -> str:
    shown = [c for c in columns if c != "error"]
    body = []
    for r in rows:
        line = []
        for c in shown:
            v = r.get(c, "NA")
            try:
                v = f"{float(v):.4g}" if c not in ("seed", "censored") else v
            except ValueError:
                pass
            line.append(str(v))
        if r.get("error"):
            line.append(r["error"])
        body.append(line)
    head = shown + (["error"] if any(r.get("error") for r in rows) else [])
    widths = [max(len(h), *(len(l[i]) for l in body if i < len(l))) if body else len(h) for i, h in enumerate(head)]
    fmt = lambda cells_: "  ".join(c.rjust(w) for c, w in zip(cells_, widths))  # noqa: E731
    return "\n".join([fmt(head), fmt(["-" * w for w in widths])] + [fmt(l) for l in body])
