"""CSV/JSON writers with a provenance comment and round-trip number formatting."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def provenance(config_text: str | bytes = b"") -> str:
    if isinstance(config_text, str):
        config_text = config_text.encode()
    return f"penaltystop {__version__} config_sha256={hashlib.sha256(config_text).hexdigest()}"


def write_csv(path, header, rows, prov: str | None = None) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if prov:
            fh.write(f"# {prov}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def write_json(path, payload: dict, prov: str | None = None) -> Path:
    path = Path(path)
    body = dict(payload)
    if prov:
        body = {"provenance": prov, **body}
    path.write_text(json.dumps(body, indent=2, sort_keys=False, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def write_values(path, field, points, prov: str | None = None) -> Path:
    rows = (
        (k, i, points[i], v)
        for k, row in enumerate(field.values)
        for i, v in enumerate(row)
    )
    return write_csv(path, ["slice", "state", "x", "value"], rows, prov)


def write_convergence(path, log, prov: str | None = None) -> Path:
    return write_csv(path, ["beta", "iters", "residual", "error_bound"], (r[:4] for r in log), prov)


def write_timings(path, log, prov: str | None = None) -> Path:
    return write_csv(path, ["beta", "wall_time"], ((r[0], r[4]) for r in log), prov)
