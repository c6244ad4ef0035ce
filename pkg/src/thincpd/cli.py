"""Command line front end.

Subcommands: ``thin``, ``calibrate``, ``bench`` and ``run``.
Exit status is 0 on success, 2 for config or input errors and 3 for
numerical or calibration errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import bench
from .calibration import DetectorSpec, make_stepper, resolve_constants
from .config import load, validate_horizon
from .errors import InputError, NumericalError
from .hotelling import HotellingConfig
from .io import format_real, points_csv, read_points, table_csv, write_atomic
from .kcusum import DEFAULT_DELTA, KcusumConfig
from .kernel import FAMILIES, Kernel, median_heuristic
from .scanb import ScanBConfig
from .thinning import SamplePool, thin

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _kernel(points, family: str, bandwidth: str) -> Kernel:
    if bandwidth == "median":
        return Kernel(family, median_heuristic(points))
    try:
        return Kernel(family, float(bandwidth))
    except ValueError:
        raise InputError(f"--bandwidth must be 'median' or a positive number, got {bandwidth!r}") from None


def cmd_thin(args) -> int:
    points = read_points(args.pool)
    if args.m > len(points):
        raise InputError(f"thin size m={args.m} exceeds pool size M={len(points)}")
    pool = SamplePool(points, "raw")
    k = _kernel(points, args.kernel, args.bandwidth)
    result = thin(k, pool, args.m)
    out = Path(args.out)
    trace_path = Path(args.trace) if args.trace else out.with_name(out.stem + "_trace.csv")
    write_atomic(out, points_csv(points[result.selected_indices]))
    trace_rows = [
        {"step": str(s + 1), "chosen_index": str(int(i)), "objective": format_real(v)}
        for s, (i, v) in enumerate(zip(result.selected_indices, result.trace))
    ]
    write_atomic(trace_path, table_csv(["step", "chosen_index", "objective"], trace_rows))
    print(f"objective_value {result.objective_value!r}")
    return EXIT_OK


def _experiment(args):
    cfg = load(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.t_max is not None:
        changes["t_max"] = args.t_max
    if args.out is not None:
        changes["out"] = args.out
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    if changes:
        cfg = cfg.replace(**changes)
        if cfg.trials < 1 or cfg.t_max < 2 or cfg.seed < 0:
            raise InputError("--trials must be >= 1, --t-max >= 2 and --seed >= 0")
        validate_horizon(cfg)
    return cfg


def _bench_like(args, with_edd: bool) -> int:
    cfg = _experiment(args)
    rows = bench.run_bench(cfg, with_edd=with_edd)
    columns = bench.BENCH_COLUMNS if with_edd else bench.CALIBRATE_COLUMNS
    write_atomic(cfg.out, table_csv(columns, rows))
    print(bench.summary_table(rows, columns))
    print(f"wrote {len(rows)} rows to {cfg.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    return _bench_like(args, with_edd=True)


def cmd_calibrate(args) -> int:
    return _bench_like(args, with_edd=False)


def cmd_run(args) -> int:
    pool_points = read_points(args.pool)
    stream = read_points(args.stream)
    if stream.shape[1] != pool_points.shape[1]:
        raise InputError(f"stream dimension {stream.shape[1]} differs from pool dimension {pool_points.shape[1]}")
    t_max = args.t_max if args.t_max is not None else len(stream)
    if t_max > len(stream):
        raise InputError(f"--t-max {t_max} exceeds the stream length {len(stream)}")
    pool = SamplePool(pool_points, "raw")
    seed = args.seed if args.seed is not None else 0
    if args.detector == "hotelling":
        spec = DetectorSpec("hotelling", HotellingConfig(window=args.window, ridge=args.ridge))
    else:
        k = _kernel(pool_points, args.kernel, args.bandwidth)
        if args.detector == "scanb":
            spec = DetectorSpec("scanb", ScanBConfig(k, N=args.N, B=args.B, seed=seed))
        else:
            spec = DetectorSpec("kcusum", KcusumConfig(k, delta=args.delta, seed=seed))
    spec = resolve_constants(spec, pool)
    step = make_stepper(spec, pool, seed)
    for t in range(1, t_max + 1):
        z = step(stream[t - 1])
        if z is not None and z > args.b:
            print(t)
            return EXIT_OK
    print(t_max + 1)
    print(f"no alarm within {t_max} steps", file=sys.stderr)
    return EXIT_OK


def _finite(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thincpd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thin", help="select an optimal sub-sample of a pool file")
    p.add_argument("pool", help="pool CSV (no header, one point per row)")
    p.add_argument("--m", type=int, required=True, help="number of points to keep")
    p.add_argument("--kernel", choices=FAMILIES, default="rbf")
    p.add_argument("--bandwidth", default="median")
    p.add_argument("--out", required=True, help="thinned pool CSV")
    p.add_argument("--trace", help="trace CSV (default: <out stem>_trace.csv)")
    p.set_defaults(func=cmd_thin)

    for name, func, text in (
        ("calibrate", cmd_calibrate, "calibrate thresholds to the target ARLs"),
        ("bench", cmd_bench, "calibrate thresholds and estimate EDD"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="experiment TOML file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--t-max", type=int, dest="t_max")
        p.add_argument("--out")
        p.add_argument("--workers", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("run", help="run one detector on a stream file and print the alarm time")
    p.add_argument("--detector", choices=("scanb", "kcusum", "hotelling"), required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--b", "--threshold", dest="b", type=_finite, required=True,
                   help="detection threshold; write negative values as --b=-1.5")
    p.add_argument("--seed", type=int)
    p.add_argument("--t-max", type=int, dest="t_max")
    p.add_argument("--out", help="unused; accepted for a uniform flag set")
    p.add_argument("--kernel", choices=FAMILIES, default="rbf")
    p.add_argument("--bandwidth", default="median")
    p.add_argument("--N", type=int, default=15)
    p.add_argument("--B", type=int, default=50)
    p.add_argument("--delta", type=_finite, default=DEFAULT_DELTA)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--ridge", type=_finite, default=None)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
