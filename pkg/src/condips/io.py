"""Plain CSV and JSON output with readers for every file the package writes.

Floats are written with ``repr`` (shortest round-trip form), so a rerun with
the same seed reproduces the files byte for byte. Run metadata with
timestamps goes to ``meta.json`` only.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = ["write_csv", "read_csv", "write_meta", "read_meta", "write_profile",
           "write_snapshot", "read_snapshot"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    """Write ``rows`` (iterable of sequences) under ``header``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of a CSV written by :func:`write_csv`, keyed by header name.

    Integer-looking columns come back as int64, the rest as float64. Empty
    cells read as NaN; lines starting with ``#`` are skipped.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise ConfigError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([int(v) for v in col], dtype=np.int64)
        except ValueError:
            out[name] = np.array([float(v) if v != "" else np.nan for v in col], dtype=float)
    return out


def write_profile(path, f) -> Path:
    """Write a profile as ``k,f_k`` rows, the format ``load_profile`` reads."""
    return write_csv(path, ["k", "f_k"], ((k, float(v)) for k, v in enumerate(f)))


def write_snapshot(path, times, counts, header: dict) -> Path:
    """Class counts over time as long-format ``t,k,count`` rows.

    The first line is ``# `` followed by ``header`` as JSON (L, N, seed,
    model). Zero counts are omitted.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = ((t, k, int(c)) for t, row in zip(times, counts) for k, c in enumerate(row) if c)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True, default=str) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "k", "count"])
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_snapshot(path) -> tuple[dict, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_snapshot`: (header, times, counts[time, k])."""
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise ConfigError(f"{path} has no JSON header line")
    header = json.loads(first[2:])
    cols = read_csv(path)
    times = np.unique(cols["t"].astype(float))
    width = int(cols["k"].max()) + 1 if cols["k"].size else 1
    counts = np.zeros((times.size, width), dtype=np.int64)
    counts[np.searchsorted(times, cols["t"]), cols["k"]] = cols["count"]
    return header, times, counts


def write_meta(path, payload: dict, started: float | None = None) -> Path:
    """``meta.json`` with the payload plus timestamps and platform info."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    now = time.time()
    meta = dict(payload)
    meta["finished_utc"] = datetime.fromtimestamp(now, timezone.utc).isoformat()
    if started is not None:
        meta["started_utc"] = datetime.fromtimestamp(started, timezone.utc).isoformat()
        meta["wall_seconds"] = round(now - started, 3)
    meta["python"] = platform.python_version()
    meta["numpy"] = np.__version__
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def read_meta(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
