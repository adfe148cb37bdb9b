"""Run configuration: JSON schema defaults, canonical form and hashing.

A config is a JSON object with five blocks plus a few scalars::

    {
      "kernel":   {"family": "exponential", "sigma": 1.0, "conv": 1.0},
      "grid":     {"N": 4096, "L": null},
      "initial":  {"kind": "gaussian", "mass": 0.4, "peak": 0.3, "center": 0.0, "sign": 1},
      "time":     {"T_final": 800.0, "stepper": "rk4", "dt": null, "safety": 0.5},
      "snapshots": {"t_min": 0.625, "ratio": 1.189207115002721},
      "diagnostics": {"tail_R": null, "direct_max_N": 2048},
      "policy": "enforce",
      "seed": 0
    }

``grid.L = null`` selects L = 25 sqrt(T_final A). Missing keys take the
defaults above.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ConfigInvalid

DEFAULTS = {
    "kernel": {"family": "exponential", "sigma": 1.0, "conv": 1.0},
    "grid": {"N": 4096, "L": None},
    "initial": {"kind": "gaussian", "mass": 0.4, "peak": 0.3, "center": 0.0, "sign": 1},
    "time": {"T_final": 800.0, "stepper": "rk4", "dt": None, "safety": 0.5},
    "snapshots": {"t_min": 0.625, "ratio": 2.0**0.25},
    "diagnostics": {"tail_R": None, "direct_max_N": 2048},
    "policy": "enforce",
    "seed": 0,
}

BLOCKS = ("kernel", "grid", "initial", "time", "snapshots", "diagnostics")
STEPPERS = ("euler", "rk4")
POLICIES = ("enforce", "warn")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            # family-specific kernel/initial keys replace rather than merge
            if key in ("kernel", "initial") and val.get("family", val.get("kind")) not in (
                None,
                out[key].get("family", out[key].get("kind")),
            ):
                out[key] = copy.deepcopy(val)
            else:
                out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def normalize(cfg: dict | None = None) -> dict:
    """Fill defaults and check the obvious constraints."""
    cfg = _merge(DEFAULTS, cfg or {})
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    for block in BLOCKS:
        if not isinstance(cfg[block], dict):
            raise ConfigInvalid(f"config block {block!r} must be an object")
    t = cfg["time"]
    try:
        if not float(t["T_final"]) > 0:
            raise ConfigInvalid("time.T_final must be positive")
        if t["stepper"] not in STEPPERS:
            raise ConfigInvalid(f"time.stepper must be one of {STEPPERS}")
        if t["dt"] is not None and not float(t["dt"]) > 0:
            raise ConfigInvalid("time.dt must be positive or null")
        if not float(t["safety"]) > 0:
            raise ConfigInvalid("time.safety must be positive")
        if int(cfg["grid"]["N"]) < 8:
            raise ConfigInvalid("grid.N must be >= 8")
        if cfg["grid"]["L"] is not None and not float(cfg["grid"]["L"]) > 0:
            raise ConfigInvalid("grid.L must be positive or null")
        s = cfg["snapshots"]
        if not float(s["t_min"]) > 0 or not float(s["ratio"]) > 1:
            raise ConfigInvalid("snapshots need t_min > 0 and ratio > 1")
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"malformed config: {exc}") from exc
    if cfg["policy"] not in POLICIES:
        raise ConfigInvalid(f"policy must be one of {POLICIES}")
    return cfg


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(normalize(cfg)).encode()).hexdigest()[:16]


def load(path) -> dict:
    """Read and normalize a config file; relative table paths resolve against it."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"{path}: top level must be an object")
    kern = raw.get("kernel", {})
    for key in ("K_table", "G_table"):
        if isinstance(kern.get(key), str) and not Path(kern[key]).is_absolute():
            kern[key] = str((path.parent / kern[key]).resolve())
    return normalize(raw)
