"""Pipeline configuration: defaults, file loading, and hashing.

Config files are JSON; TOML is accepted on interpreters that ship
``tomllib`` (Python 3.11+). Unknown keys are rejected so typos fail
loudly, and the canonical hash of the merged config goes into every
provenance record.
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .histnorm import DEFAULT_PERCENTILES

DEFAULTS: dict[str, Any] = {
    "preprocess": {
        "spacing_inplane": 1.25,
        "spacing_z": None,  # keep the source through-plane spacing
        "crop": [256, 256],
        "pad_value": 0.0,
        "standardize_before_crop": False,
    },
    "histogram": {
        "percentiles": list(DEFAULT_PERCENTILES),
        "foreground": "none",
    },
    "augment": {
        "weights": {"motion": 3.0, "ghosting": 1.0, "bias": 1.0, "gamma": 1.0},
        "motion": {"num_transforms": 2, "degrees": 10.0, "translation": 10.0},
        "ghosting": {"num_ghosts": [4, 10], "intensity": [0.5, 1.0],
                     "restore_center": 0.02},
        "bias": {"order": 3, "coefficient_range": 0.5},
        "gamma": {"log_gamma_range": 0.3},
    },
}


def _merge(defaults: Mapping, overrides: Mapping, path: str = "") -> dict:
    out = copy.deepcopy(dict(defaults))
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"config key {where!r} must be a table/object")
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None) -> dict:
    """Merge a JSON/TOML config file over the defaults."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError as exc:  # tomllib ships with Python 3.11+
            raise ConfigError(
                "TOML configs need Python 3.11+; use JSON on this interpreter"
            ) from exc
        doc = tomllib.loads(path.read_text())
    else:
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError("config root must be a table/object")
    return _merge(DEFAULTS, doc)


def config_hash(config: Mapping) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
