"""Bundled scenario configs shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .config import ConfigError, ScenarioConfig, load_config, yaml_load


def _config_dir():
    return resources.files("entroflow").joinpath("configs")


def bundled_scenarios() -> dict[str, Path]:
    """name -> path of every bundled YAML scenario, sorted by name."""
    out = {}
    for entry in _config_dir().iterdir():
        if entry.name.endswith(".yaml"):
            out[entry.name[: -len(".yaml")]] = Path(str(entry))
    return dict(sorted(out.items()))


def resolve(ref: str) -> Path:
    """A bundled scenario name or a filesystem path."""
    p = Path(ref)
    if p.suffix in (".yaml", ".yml") or p.exists():
        if not p.exists():
            raise ConfigError([f"config file {ref} not found"])
        return p
    known = bundled_scenarios()
    if ref not in known:
        raise ConfigError([f"unknown scenario {ref!r}; bundled: {', '.join(known)}"])
    return known[ref]


def load_scenario(ref: str, overrides=()) -> ScenarioConfig:
    return load_config(resolve(ref), overrides)


def expand_batch(path: Path) -> list[Path] | None:
    """Entries of a batch file (a mapping with a `scenarios` list), else None."""
    try:
        data = yaml_load(Path(path).read_text())
    except (OSError, yaml.YAMLError):
        return None
    if not (isinstance(data, dict) and set(data) == {"scenarios"}):
        return None
    if not isinstance(data["scenarios"], list):
        raise ConfigError([f"{path}: scenarios must be a list"])
    base = Path(path).parent
    out = []
    for item in data["scenarios"]:
        cand = base / str(item)
        out.append(cand if cand.exists() else resolve(str(item)))
    return out
