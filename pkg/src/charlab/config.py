"""TOML/JSON experiment configs.

Layout (TOML)::

    theorem = "sd"          # sd | heyde | thm3 | sample_mean
    seed = 0
    d = 1

    [source]                # kind = "exact" | "empirical"
    kind = "empirical"
    N = 100000
    bootstrap = 200

    [[marginals]]           # one table per component
    family = "uniform"

    [operators]             # scalars mean c * I
    A = [1, 1]
    B = [1, -1]

    [[coupling]]            # optional, Gaussian marginals only (1-based pair)
    pair = [1, 2]
    block = 0.3

Sample-mean configs may give a single ``[marginal]`` table plus ``n``.
Optional tables ``[grid]``, ``[certify]``, ``[gaussianity]``,
``[elimination]`` and ``[output]`` override the defaults below; the
resolved config, defaults included, is echoed into every report.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .charfn import GridSpec
from .distributions import dist_from_config
from .errors import CharlabError, ConfigError
from .theorems import THEOREMS, ExperimentSpec

DEFAULTS = {
    "source": {"kind": "exact", "N": 100_000, "bootstrap": 200},
    "grid": {"rays": 8, "radii": 12, "radius": 2.0, "floor": 0.2},
    "certify": {"D_max": 4, "probes": 64},
    "gaussianity": {"directions": 16},
    "elimination": {"replays": 5},
    "output": {"dir": ".", "csv": []},
    "verbosity": 1,
}
TOP_KEYS = {"theorem", "seed", "d", "n", "name", "marginals", "marginal", "operators", "coupling", *DEFAULTS}


@dataclass
class RunConfig:
    experiment: ExperimentSpec
    echo: dict
    out_dir: Path
    csv: list = field(default_factory=list)
    verbosity: int = 1

    @property
    def seed(self) -> int:
        return self.experiment.seed

    @property
    def config_hash(self) -> str:
        return config_hash(self.echo)


def config_hash(echo: dict) -> str:
    blob = json.dumps(echo, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def read_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "path") from exc
    try:
        if path.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}: {exc.msg}", "json") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc), "toml") from exc


def _section(raw: dict, name: str) -> dict:
    got = raw.get(name, {})
    if not isinstance(got, dict):
        raise ConfigError("expected a table", name)
    unknown = set(got) - set(DEFAULTS[name])
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", name)
    return {**DEFAULTS[name], **got}


def _int(value, name: str, lo: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < lo:
        raise ConfigError(f"expected an integer >= {lo}, got {value!r}", name)
    return value


def _operator(value, d: int, name: str) -> np.ndarray:
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError("operator entries must be numbers", name) from exc
    if a.ndim == 0:
        return a * np.eye(d)
    if a.shape != (d, d):
        raise ConfigError(f"expected a scalar or a {d}x{d} matrix, got shape {a.shape}", name)
    return a


def _operators(raw: dict, theorem: str, n: int, d: int) -> dict:
    ops = raw.get("operators", {})
    if not isinstance(ops, dict):
        raise ConfigError("expected a table", "operators")
    if theorem == "thm3":
        if "C" not in ops:
            raise ConfigError("thm3 needs a single operator C", "operators.C")
        return {"C": _operator(ops["C"], d, "operators.C")}
    if theorem == "sample_mean":
        return {}
    out = {}
    for key in ("A", "B"):
        lst = ops.get(key)
        if not isinstance(lst, list) or len(lst) != n:
            raise ConfigError(f"expected a list of {n} operators", f"operators.{key}")
        out[key] = tuple(_operator(v, d, f"operators.{key}[{j + 1}]") for j, v in enumerate(lst))
    return out


def _marginals(raw: dict, theorem: str, d: int) -> tuple[list, list]:
    if "marginals" in raw:
        specs = raw["marginals"]
        if not isinstance(specs, list) or not specs:
            raise ConfigError("expected a non-empty array of tables", "marginals")
    elif "marginal" in raw:
        n = _int(raw.get("n"), "n", 2)
        specs = [raw["marginal"]] * n
    else:
        raise ConfigError("missing component laws", "marginals")
    dists = []
    for j, s in enumerate(specs):
        try:
            dists.append(dist_from_config(s, d))
        except (CharlabError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc), f"marginals[{j + 1}]") from exc
    return dists, [dict(s) for s in specs]


def _coupling(raw: dict, n: int, d: int) -> dict:
    out = {}
    for k, c in enumerate(raw.get("coupling", [])):
        name = f"coupling[{k + 1}]"
        pair = c.get("pair")
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(p, int) and 1 <= p <= n for p in pair)):
            raise ConfigError(f"pair must be two indices in 1..{n}", name)
        out[(pair[0] - 1, pair[1] - 1)] = _operator(c.get("block", 0.0), d, name + ".block")
    return out


def load_config(path_or_dict, seed_override: str | None = None) -> RunConfig:
    """Parse and validate a config; ``CHARLAB_SEED`` (or ``seed_override``) replaces the seed."""
    raw = read_config(path_or_dict) if not isinstance(path_or_dict, dict) else dict(path_or_dict)
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", "config")
    theorem = raw.get("theorem")
    if theorem not in THEOREMS:
        raise ConfigError(f"expected one of {list(THEOREMS)}, got {theorem!r}", "theorem")
    env = seed_override if seed_override is not None else os.environ.get("CHARLAB_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError as exc:
            raise ConfigError(f"not an integer: {env!r}", "CHARLAB_SEED") from exc
    else:
        if "seed" not in raw:
            raise ConfigError("a seed is required", "seed")
        seed = _int(raw["seed"], "seed")
    d = _int(raw.get("d", 1), "d", 1)
    source = _section(raw, "source")
    if source["kind"] not in ("exact", "empirical"):
        raise ConfigError("expected 'exact' or 'empirical'", "source.kind")
    grid = _section(raw, "grid")
    cert = _section(raw, "certify")
    gauss = _section(raw, "gaussianity")
    elim = _section(raw, "elimination")
    output = _section(raw, "output")

    dists, mspecs = _marginals(raw, theorem, d)
    n = len(dists)
    ops = _operators(raw, theorem, n, d)
    coupling = _coupling(raw, n, d)
    try:
        spec = ExperimentSpec(
            theorem, tuple(dists), A=ops.get("A", ()), B=ops.get("B", ()), C=ops.get("C"), coupling=coupling,
            source=source["kind"], N=_int(source["N"], "source.N", 2), seed=seed,
            bootstrap=_int(source["bootstrap"], "source.bootstrap"),
            grid=GridSpec(_int(grid["rays"], "grid.rays", 1), _int(grid["radii"], "grid.radii", 1),
                          float(grid["radius"]), float(grid["floor"])),
            D_max=_int(cert["D_max"], "certify.D_max"), probes=_int(cert["probes"], "certify.probes", 1),
            directions=_int(gauss["directions"], "gaussianity.directions", 1),
            replays=_int(elim["replays"], "elimination.replays", 1), name=str(raw.get("name", "")))
    except CharlabError as exc:
        raise ConfigError(str(exc), "experiment") from exc

    echo = {
        "theorem": theorem, "seed": seed, "d": d, "n": n, "name": spec.name,
        "marginals": [m.to_config() for m in dists],
        "operators": {k: (v.tolist() if isinstance(v, np.ndarray) else [a.tolist() for a in v]) for k, v in ops.items()},
        "coupling": [{"pair": [i + 1, j + 1], "block": np.asarray(b).tolist()} for (i, j), b in sorted(coupling.items())],
        "source": source, "grid": {**grid, "radius": float(grid["radius"]), "floor": float(grid["floor"])},
        "certify": cert, "gaussianity": gauss, "elimination": elim, "output": output,
    }
    csv = list(output["csv"])
    return RunConfig(spec, echo, Path(output["dir"]), csv, int(raw.get("verbosity", 1)))
