"""JSON reports: verdict + echoed config + environment block."""
from __future__ import annotations

import json
import math
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .theorems import TheoremVerdict

SCHEMA_VERSION = 1


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null, complex to [re, im]."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [clean(float(obj.real)), clean(float(obj.imag))]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def build_report(verdict: TheoremVerdict, cfg: RunConfig, artifacts=()) -> dict:
    out = verdict.to_dict()
    out.update({
        "schema_version": SCHEMA_VERSION,
        "config": cfg.echo,
        "environment": {"version": __version__, "config_hash": cfg.config_hash,
                        "python": platform.python_version(), "numpy": np.__version__},
        "artifacts": [str(a) for a in artifacts],
    })
    return clean(out)


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report))
    return path
