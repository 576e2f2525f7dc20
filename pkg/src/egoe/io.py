"""CSV and manifest writers.

CSV files start with ``#``-prefixed ``key: value`` metadata lines followed
by an RFC-4180 header and rows. Floats are written with ``repr`` so files
round-trip exactly and identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

DENSITY_COLUMNS = ("bin_center", "density_numeric", "density_ed_gaussian", "density_semicircle")
SURVIVAL_COLUMNS = ("t", "F_numeric", "F_sem", "F_gauss", "F_bessel")
STRENGTH_COLUMNS = ("bin_center", "strength")
MOMENTS_COLUMNS = (
    "k",
    "sigma2_numeric",
    "sigma2_numeric_err",
    "sigma2_analytic",
    "gamma2_numeric",
    "gamma2_numeric_err",
    "gamma2_finite",
    "gamma2_asymptotic",
)
ANALYTIC_COLUMNS = (
    "k",
    "sigma2_V",
    "m4_V",
    "gamma2_finite",
    "gamma2_asymptotic",
    "sigma2_H0",
    "sigma0_sq",
)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, columns, rows, meta=None) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        for key, val in (meta or {}).items():
            fh.write(f"# {key}: {_fmt(val)}\n")
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(meta, columns, rows)``; rows are lists of floats."""
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [[float(v) for v in r] for r in reader if r]
    return meta, columns, rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def write_manifest(path, manifest: dict) -> Path:
    """Write JSON atomically: temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=".manifest-", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
