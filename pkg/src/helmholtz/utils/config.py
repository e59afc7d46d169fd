"""Configuration loading and management utilities."""

import json
from pathlib import Path
from typing import Any

import yaml


def load_config(config_path: str | Path, _chain: tuple[Path, ...] = ()) -> dict[str, Any]:
    """Load a YAML config; ``_extends: other.yaml`` merges it over a base file (relative path)."""
    config_path = Path(config_path).resolve()
    if config_path in _chain:
        cycle = " -> ".join(p.name for p in (*_chain, config_path))
        raise ValueError(f"circular _extends: {cycle}")

    with open(config_path) as f:
        config = yaml.safe_load(f) or {}
    if not isinstance(config, dict):
        raise ValueError(f"{config_path}: expected a mapping at the top level")

    if "_extends" in config:
        base_path = config_path.parent / config.pop("_extends")
        base_config = load_config(base_path, (*_chain, config_path))
        config = _deep_merge(base_config, config)

    return config


def save_config(config: dict[str, Any], config_path: str | Path) -> None:
    """Save configuration to YAML file."""
    config_path = Path(config_path)
    config_path.parent.mkdir(parents=True, exist_ok=True)

    with open(config_path, "w") as f:
        yaml.dump(config, f, default_flow_style=False, sort_keys=False)


def _deep_merge(base: dict, override: dict) -> dict:
    """Deep merge two dictionaries, with override taking precedence."""
    result = base.copy()

    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = value

    return result


def get_section(config: dict[str, Any] | None, name: str) -> dict[str, Any]:
    """Return a copy of one top-level config section, empty if absent."""
    if not config:
        return {}
    section = config.get(name) or {}
    if not isinstance(section, dict):
        raise ValueError(f"Config section '{name}' must be a mapping, got {type(section).__name__}")
    return dict(section)


def merge_overrides(
    config: dict[str, Any], section: str, overrides: dict[str, Any]
) -> dict[str, Any]:
    """Apply non-None overrides (typically CLI flags or a JSON file) to one section."""
    patch = {k: v for k, v in overrides.items() if v is not None}
    return _deep_merge(config, {section: patch})


def load_json_overrides(path: str | Path | None) -> dict[str, Any]:
    """Load a flat JSON object used to override a config section."""
    if path is None:
        return {}
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object, got {type(data).__name__}")
    return data
