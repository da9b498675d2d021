"""Config parsing and CSV output.

Config documents are JSON objects.  Top-level keys are scalars naming the
run parameters; a command may add one section (an object keyed by the
command name) holding its own scalars or lists of numbers.  Unknown and
duplicate keys are errors.

Every CSV starts with ``# key: value`` metadata lines (values JSON-encoded)
followed by a header row; floats are written with ``repr`` so they parse
back bit-identically.
"""
import json
import math
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .estimators import FIELDS, ObservableSeries
from .model import LatticeParams, ModelParams
from .sampler import RunConfig

SERIES_HEADER = ("sweep",) + FIELDS
CRITICAL_HEADER = ("mass", "a_reg", "alpha_cr", "alpha_lo", "alpha_hi")

RUN_DEFAULTS = {
    "mass": 1.0,
    "alpha": 1.0,
    "a_reg": 0.1,
    "n_slices": 128,
    "dt": None,
    "beta": None,
    "seed": 0,
    "n_therm_sweeps": None,
    "n_measure_sweeps": 10_000,
    "measure_every": 1,
    "target_acceptance": 0.5,
    "initial_path": "cold",
    "hot_width": 1.0,
    "initial_step": None,
    "segment_moves": None,
    "threads": 1,
}
DEFAULT_BETA = 16.0

SECTION_KEYS = {
    "run": {},
    "virial": {"bin_size": None},
    "free-check": {"n_sigma": 3.0},
    "scan-alpha": {"log2_alpha_min": -3.0, "log2_alpha_max": 2.0, "log2_alpha_step": 1.0,
                   "sweep_budgets": [2500, 5000, 10000, 20000]},
    "find-critical": {"alpha_lo": 0.05, "alpha_hi": 2.0, "rel_tol": 0.1, "n_chains": 5,
                      "n_blocks": 32, "max_retries": 2},
    "scan-mass": {"masses": [0.01, 0.1, 1.0, 10.0, 100.0], "alpha_lo": 0.001, "alpha_hi": 2.0,
                  "rel_tol": 0.1, "n_chains": 5, "n_blocks": 32, "max_retries": 2},
    "oracle-nr": {"n_points": 2048, "box_half_width": 20.0},
    "oracle-rel": {"n_points": 2048, "box_half_width": 20.0},
}
COMMANDS = tuple(SECTION_KEYS)


class ConfigError(ValueError):
    pass


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConfigError(f"duplicate key {key!r}")
        out[key] = value
    return out


def _is_scalar(v):
    return v is None or isinstance(v, (bool, int, float, str))


def parse_config(text: str, command: str = "run") -> tuple[RunConfig, dict, dict]:
    """Parse a config document for ``command``.

    Returns the validated RunConfig, the command section with defaults
    filled, and the flat dict of every effective top-level value (for the
    output metadata).
    """
    if command not in SECTION_KEYS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    top = {k: v for k, v in doc.items() if k not in SECTION_KEYS}
    unknown = sorted(set(top) - set(RUN_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    for key, value in top.items():
        if not _is_scalar(value):
            raise ConfigError(f"{key!r} must be a scalar")

    section = dict(SECTION_KEYS[command])
    given = doc.get(command, {})
    if not isinstance(given, dict):
        raise ConfigError(f"section {command!r} must be an object")
    unknown = sorted(set(given) - set(section))
    if unknown:
        raise ConfigError(f"unknown keys in {command!r}: {', '.join(unknown)}")
    for key, value in given.items():
        if not (_is_scalar(value) or (isinstance(value, list) and all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in value))):
            raise ConfigError(f"{command}.{key} must be a scalar or a list of numbers")
    section.update(given)

    values = {**RUN_DEFAULTS, **top}
    n_slices = values["n_slices"]
    if values["dt"] is None:
        values["dt"] = (values["beta"] or DEFAULT_BETA) / n_slices if isinstance(n_slices, int) and n_slices > 0 else None
    elif values["beta"] is not None and not math.isclose(values["beta"], n_slices * values["dt"], rel_tol=1e-12):
        raise ConfigError(f"beta={values['beta']} disagrees with n_slices*dt={n_slices * values['dt']}")
    _check_types(values)
    try:
        model = ModelParams(float(values["mass"]), float(values["alpha"]), float(values["a_reg"]))
        lattice = LatticeParams(values["n_slices"], float(values["dt"]))
        values["beta"] = lattice.beta
        config = RunConfig(
            model=model, lattice=lattice, seed=values["seed"],
            n_therm_sweeps=values["n_therm_sweeps"], n_measure_sweeps=values["n_measure_sweeps"],
            measure_every=values["measure_every"], target_acceptance=float(values["target_acceptance"]),
            initial_path=values["initial_path"], hot_width=float(values["hot_width"]),
            initial_step=values["initial_step"], segment_moves=values["segment_moves"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if not (isinstance(values["threads"], int) and values["threads"] >= 1):
        raise ConfigError("threads must be an integer >= 1")
    values["n_therm_sweeps"] = config.n_therm_sweeps
    values["segment_moves"] = config.segment_moves
    return config, section, values


_INT_KEYS = ("n_slices", "seed", "n_measure_sweeps", "measure_every", "threads")
_OPT_INT_KEYS = ("n_therm_sweeps", "segment_moves")
_NUM_KEYS = ("mass", "alpha", "a_reg", "dt", "target_acceptance", "hot_width")


def _check_types(values):
    for key in _INT_KEYS:
        if not isinstance(values[key], int) or isinstance(values[key], bool):
            raise ConfigError(f"{key} must be an integer")
    for key in _OPT_INT_KEYS:
        v = values[key]
        if v is not None and (not isinstance(v, int) or isinstance(v, bool)):
            raise ConfigError(f"{key} must be an integer")
    for key in _NUM_KEYS:
        v = values[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"{key} must be a number")
    if values["initial_step"] is not None and not values["initial_step"] > 0:
        raise ConfigError("initial_step must be > 0")
    if not isinstance(values["initial_path"], str):
        raise ConfigError("initial_path must be a string")


# -- CSV --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_metadata(dest, metadata: dict, timestamp: bool = True):
    meta = {"version": __version__, **metadata}
    if timestamp:
        meta["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    for key, value in meta.items():
        dest.write(f"# {key}: {json.dumps(value, sort_keys=True, default=str)}\n")


def emit_series(series: ObservableSeries, dest, timestamp: bool = True, metadata: dict | None = None):
    """Write a series as CSV with a metadata block."""
    if len(series) == 0:
        raise ValueError("refusing to write an empty series")
    write_metadata(dest, {**series.metadata, **(metadata or {})}, timestamp)
    dest.write(",".join(SERIES_HEADER) + "\n")
    cols = [series.sweep] + [getattr(series, f) for f in FIELDS]
    for row in zip(*cols):
        dest.write(",".join(_fmt(v) for v in row) + "\n")


def write_table(dest, header, rows, metadata: dict, timestamp: bool = True):
    write_metadata(dest, metadata, timestamp)
    dest.write(",".join(header) + "\n")
    for row in rows:
        dest.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def read_table(src) -> tuple[dict, list[str], list[list[str]]]:
    meta, header, rows = {}, None, []
    for line in src:
        line = line.rstrip("\n")
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = json.loads(value)
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, header, rows


def read_series(src) -> ObservableSeries:
    meta, header, rows = read_table(src)
    if tuple(header) != SERIES_HEADER:
        raise ValueError(f"unexpected header {header}")
    cols = list(zip(*rows)) if rows else [[]] * len(SERIES_HEADER)
    sweep = np.array([int(v) for v in cols[0]], dtype=np.int64)
    rest = [np.array([float(v) for v in c]) for c in cols[1:]]
    meta.pop("timestamp", None)
    return ObservableSeries(sweep, *rest, metadata=meta)
