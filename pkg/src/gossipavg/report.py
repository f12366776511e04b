"""CSV/JSON artifact writing shared by the CLI and the experiments.

Every run directory gets a ``manifest.json`` holding the resolved
configuration; re-running from the manifest reproduces the artifacts
byte for byte (floats are printed with 12 significant digits and no
timestamps are embedded).
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

MANIFEST_NAME = "manifest.json"
OUTDIR_ENV = "GOSSIPAVG_OUTDIR"


def fmt(value) -> str:
    """12-significant-digit rendering used for all numeric output."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def default_outdir() -> Path:
    return Path(os.environ.get(OUTDIR_ENV, "gossipavg-out"))


def ensure_outdir(path=None) -> Path:
    out = Path(path) if path else default_outdir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_csv(path, rows, columns, schema: str) -> Path:
    """Write dict rows to CSV with a schema comment in row 1."""
    path = Path(path)
    with open(path, "w") as f:
        f.write(f"# schema: {schema}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(fmt(row.get(c)) for c in columns) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def write_manifest(outdir, command: str, options: dict) -> Path:
    return write_json(
        Path(outdir) / MANIFEST_NAME,
        {
            "tool": "gossipavg",
            "manifest_version": 1,
            "command": command,
            "options": _jsonable(options),
        },
    )


def read_manifest(path) -> dict:
    with open(path) as f:
        manifest = json.load(f)
    if manifest.get("tool") != "gossipavg":
        raise ValueError(f"{path} is not a gossipavg manifest")
    return manifest
