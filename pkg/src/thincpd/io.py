"""Pool files and atomic CSV output.

A pool file is headerless CSV, one point per row; the dimension is taken
from the first row and enforced on the rest.  Reals are written with
``repr`` so a read/write cycle is lossless.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InputError


def read_points(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    rows = []
    d = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            raise InputError(f"{path}:{lineno}: not a row of decimal reals: {row!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise InputError(f"{path}:{lineno}: non-finite coordinate")
        if d is None:
            d = len(values)
        elif len(values) != d:
            raise InputError(f"{path}:{lineno}: expected {d} coordinates, got {len(values)}")
        rows.append(values)
    if not rows:
        raise InputError(f"{path}: no points")
    return np.array(rows, dtype=float)


def format_real(x) -> str:
    if x is None:
        return "NA"
    x = float(x)
    return repr(x) if math.isfinite(x) else "NA"


def points_csv(points) -> str:
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in np.asarray(points))


def write_atomic(path, text: str):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_points(path, points):
    write_atomic(path, points_csv(points))


def table_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row.get(c, "NA") for c in columns])
    return buf.getvalue()
