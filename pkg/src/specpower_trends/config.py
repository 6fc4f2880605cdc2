"""YAML configuration with packaged defaults."""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path

import yaml


def default_config() -> dict:
    text = resources.files("specpower_trends").joinpath("default_config.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None) -> dict:
    """Packaged defaults, overlaid with the sections found in ``path``."""
    config = default_config()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            override = yaml.safe_load(fh) or {}
        config = _merge(config, override)
    return config
