"""Experiment configuration: YAML files validated against a default tree.

Every key has a default. A config file only lists what it changes; unknown
keys and type mismatches are rejected. The fully resolved tree is echoed
into the run manifest.
"""

from __future__ import annotations

import copy
import json
import re
from pathlib import Path

import yaml

from .errors import InvalidArgumentError

EXPERIMENTS = (
    "mc-esn", "mc-chaotic", "narma-sweep", "ipc-sweep", "task-run",
    "lyapunov-scan", "finite-size", "desync", "time-invariance",
)


class ConfigError(InvalidArgumentError):
    """The configuration cannot be parsed or fails validation."""


SYSTEM_DEFAULTS = {
    "esn": {"type": "esn", "d": 30, "rho": 0.94, "alpha": 0.01, "sigma": 0.0, "matrix_seed": 0},
    "ode": {"type": "ode", "kind": "lorenz", "params": {}, "dt": None,
            "convention": "conventional", "noise_scaling": "hold", "escape_radius": None},
    "copy": {"type": "copy", "lam": 1.5, "omega": None, "iota": 1.0},
}

BASE = {
    "experiment": "mc-esn",
    "seed": 0,
    "threads": 1,
    "output_dir": "out",
    "system": SYSTEM_DEFAULTS["esn"],
    "ensemble": {"L": 1, "weights": "uniform", "per_trial_noise": True, "divergence": "raise"},
    "observations": ["x"],
    "components": "all",
    "baseline": True,
    "input": {"distribution": "uniform", "low": 0.0, "high": 1.0, "seed": 1,
              "levels": [0.0, 1.0]},
    "protocol": {"washout": 1000, "train": 10000, "test": 10000},
    "capacity": {"tau_max": 40, "surrogates": 100, "ridge": 1e-9, "max_degree": 3,
                 "max_delay": 40, "window_budget": 200, "time_period": None,
                 "max_harmonic": 0},
    "task": {"kind": "narma10", "delta": 0.2, "mu": 0.0, "warmup": 200},
    "sweep": {"parameter": "rho", "values": [0.94]},
    "lyapunov": {"total_steps": 100000, "renorm_interval": None, "eps0": 1e-8,
                 "transient_discard": 1000, "with_input": True, "samples": 100},
    "finite_size": {"L_values": [10, 100, 1000, 10000]},
    "desync": {"reference_L": 1000, "reference_washout": 600000, "mf_tau": 10},
    "time_invariance": {"moments": [1, 2, 3, 4], "constant_input": 0.5, "block": 500},
}

EXPERIMENT_DEFAULTS = {
    "mc-chaotic": {
        "system": {"type": "ode", "kind": "lorenz"},
        "input": {"low": -1.0, "high": 1.0},
        "ensemble": {"L": 10000, "per_trial_noise": False, "divergence": "drop"},
        "components": "all",
    },
    "narma-sweep": {
        "sweep": {"values": [0.6, 1.5]},
        "ensemble": {"L": 10000},
        "system": {"sigma": 0.01},
        "protocol": {"train": 2000, "test": 2000},
    },
    "ipc-sweep": {"sweep": {"values": [0.94]}, "capacity": {"max_degree": 2}},
    "task-run": {
        "task": {"kind": "crc"},
        "input": {"distribution": "binary"},
        "observations": ["x^2", "x^4", "x^6", "x^8"],
        "system": {"alpha": 1.0, "sigma": 1.0},
        "ensemble": {"L": 10000},
        "protocol": {"train": 2000, "test": 2000},
    },
    "lyapunov-scan": {
        "sweep": {"values": [0.5, 1.0, 1.5, 2.0, 2.5]},
        "lyapunov": {"total_steps": 20000},
    },
    "finite-size": {"system": {"sigma": 0.01}},
    "desync": {
        "system": {"type": "ode", "kind": "stuart-landau-x", "noise_scaling": "white"},
        "input": {"distribution": "normal"},
        "ensemble": {"L": 100000},
        "observations": ["x", "x^2", "x^3", "x^4", "x^5"],
        "components": [0],
        "protocol": {"washout": 5000, "train": 5000, "test": 5000},
    },
    "time-invariance": {
        "system": {"type": "ode", "kind": "stuart-landau-radial"},
        "ensemble": {"L": 100000},
        "protocol": {"washout": 2000, "train": 500, "test": 500},
        "components": [0],
    },
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check(tree, ref, path=""):
    for k, v in tree.items():
        where = f"{path}{k}"
        if k not in ref:
            raise ConfigError(f"unknown key '{where}'")
        r = ref[k]
        if isinstance(r, dict) and k != "params":
            if not isinstance(v, dict):
                raise ConfigError(f"'{where}' must be a mapping")
            _check(v, r, where + ".")
        elif r is None or v is None:
            continue
        elif isinstance(r, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"'{where}' must be true/false, got {v!r}")
        elif isinstance(r, (int, float)) and not isinstance(r, bool):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"'{where}' must be a number, got {v!r}")
            if isinstance(r, int) and not isinstance(r, bool) and isinstance(v, float) and k not in _FLOATY:
                if not v.is_integer():
                    raise ConfigError(f"'{where}' must be an integer, got {v!r}")
        elif isinstance(r, str) and not isinstance(v, str) and k not in ("components", "weights"):
            raise ConfigError(f"'{where}' must be a string, got {v!r}")
        elif isinstance(r, list) and not isinstance(v, list):
            raise ConfigError(f"'{where}' must be a list, got {v!r}")


_FLOATY = {"rho", "alpha", "sigma", "low", "high", "delta", "mu", "lam", "iota", "eps0",
           "ridge", "constant_input", "dt", "escape_radius"}


def _coerce(tree, ref):
    """Turn integral floats such as ``1e4`` into ints where the default is an int."""
    for k, v in tree.items():
        r = ref.get(k)
        if isinstance(v, dict) and isinstance(r, dict) and k != "params":
            _coerce(v, r)
        elif isinstance(r, int) and not isinstance(r, bool) and isinstance(v, float) and k not in _FLOATY:
            tree[k] = int(v)
        elif k == "L_values" and isinstance(v, list):
            tree[k] = [int(x) if isinstance(x, float) and x.is_integer() else x for x in v]
    return tree


def resolve(raw):
    """Merge ``raw`` onto the defaults for its experiment and validate."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    exp = raw.get("experiment", BASE["experiment"])
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    tree = _merge(BASE, EXPERIMENT_DEFAULTS.get(exp, {}))
    sys_type = raw.get("system", {}).get("type", tree["system"]["type"]) if isinstance(raw.get("system"), dict) else tree["system"]["type"]
    if sys_type not in SYSTEM_DEFAULTS:
        raise ConfigError(f"unknown system type {sys_type!r}")
    if sys_type != tree["system"]["type"]:
        tree["system"] = copy.deepcopy(SYSTEM_DEFAULTS[sys_type])
    else:
        tree["system"] = _merge(SYSTEM_DEFAULTS[sys_type], tree["system"])
    ref = copy.deepcopy(tree)
    _check(raw, ref)
    cfg = _coerce(_merge(tree, raw), ref)
    _semantic(cfg)
    return cfg


def _semantic(cfg):
    L = cfg["ensemble"]["L"]
    if not isinstance(L, int) and not (isinstance(L, float) and L.is_integer()):
        raise ConfigError(f"ensemble.L must be an integer, got {L!r}")
    if L < 1:
        raise ConfigError(f"ensemble.L must be >= 1, got {L}")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    p = cfg["protocol"]
    for k in ("washout", "train", "test"):
        if p[k] < 0:
            raise ConfigError(f"protocol.{k} must be >= 0")
    if p["train"] + p["test"] < 4:
        raise ConfigError("protocol.train + protocol.test must be at least 4")
    if cfg["ensemble"]["divergence"] not in ("raise", "drop"):
        raise ConfigError("ensemble.divergence must be 'raise' or 'drop'")
    dist = cfg["input"]["distribution"]
    if dist not in ("uniform", "normal", "binary"):
        raise ConfigError(f"unknown input distribution {dist!r}")
    if dist == "uniform" and not cfg["input"]["high"] > cfg["input"]["low"]:
        raise ConfigError("input.high must exceed input.low")
    if cfg["observations"] is None or len(cfg["observations"]) == 0:
        raise ConfigError("observations must be a non-empty list")
    comps = cfg["components"]
    if comps != "all" and not (isinstance(comps, list) and all(isinstance(c, int) for c in comps)):
        raise ConfigError("components must be 'all' or a list of integers")
    if cfg["experiment"] in ("narma-sweep", "ipc-sweep", "lyapunov-scan") and not cfg["sweep"]["values"]:
        raise ConfigError("sweep.values must be non-empty")
    if any(l < 1 for l in cfg["finite_size"]["L_values"]):
        raise ConfigError("finite_size.L_values must be >= 1")
    from .ensemble import ObservationFn
    from .tasks import TaskSpec

    for name in cfg["observations"]:
        try:
            ObservationFn.parse(str(name))
        except InvalidArgumentError as exc:
            raise ConfigError(f"observations: {exc}")
    try:
        TaskSpec(cfg["task"]["kind"])
    except InvalidArgumentError as exc:
        raise ConfigError(f"task.kind: {exc}")


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e4`` and ``1e-9`` as floats (YAML 1.2 style)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def load(path):
    """Read and resolve a YAML config (or a run manifest holding one)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.load(text, Loader=_Loader)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")
    if isinstance(raw, dict) and "config" in raw and "artifact_version" in raw:
        raw = raw["config"]
    return resolve(raw)
