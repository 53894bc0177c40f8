"""CSV and JSON output helpers shared by the analysis code and the CLI."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

UNITS = "time in 1/J, energy in J"


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, np.bool_):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows, units: str = UNITS) -> Path:
    """Write rows with a ``# units:`` line ahead of the header; floats as %.17g."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# units: {units}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c) for c in columns]
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path
