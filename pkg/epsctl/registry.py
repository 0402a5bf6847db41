"""Named plant presets from plants.yaml."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .benchmarks import BUILDERS
from .errors import EpsctlError, RegistryError
from .models import PlantKind
from .sysmodel import Plant, from_matrices

logger = logging.getLogger(__name__)


@dataclass
class PresetConfig:
    """A single named system or plant."""

    name: str
    kind: PlantKind
    description: str = ""
    matrices: dict = field(default_factory=dict)
    builder: str = ""  # build in code instead of from matrices, e.g. "benchmark"
    beta: Optional[float] = None

    def build(self) -> Plant:
        if self.builder:
            make = BUILDERS.get(self.builder)
            if make is None:
                raise RegistryError(f"preset {self.name}: unknown builder {self.builder!r}")
            return make(self.beta)
        return from_matrices(self.kind, {"name": self.name, **self.matrices})


def _parse_kind(name: str, raw: Optional[str]) -> PlantKind:
    try:
        return PlantKind(raw)
    except ValueError as e:
        raise RegistryError(f"preset {name}: unknown kind {raw!r}") from e


def build_registry(config_path: str) -> dict[str, PresetConfig]:
    """Load presets from a YAML file.

    Returns a dict of preset name -> PresetConfig.
    """
    path = Path(config_path)
    if not path.exists():
        raise RegistryError(f"Plants file not found: {config_path}")

    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise RegistryError(f"Malformed YAML in {config_path}: {e}") from e

    defaults = data.get("defaults", {}) or {}
    default_kind = defaults.get("kind", PlantKind.SYSTEM.value)
    default_beta = defaults.get("beta")

    presets_data = data.get("plants", {})
    if not presets_data:
        logger.warning("No plants defined in %s", config_path)
        return {}

    registry: dict[str, PresetConfig] = {}
    for name, entry in presets_data.items():
        if entry is None:
            continue
        if not isinstance(entry, dict):
            raise RegistryError(f"preset {name}: expected a mapping, got {type(entry).__name__}")
        matrices = {k: v for k, v in entry.items() if k not in ("kind", "description", "builder", "beta")}
        registry[name] = PresetConfig(
            name=name,
            kind=_parse_kind(name, entry.get("kind", default_kind)),
            description=entry.get("description", ""),
            matrices=matrices,
            builder=entry.get("builder", ""),
            beta=entry.get("beta", default_beta),
        )

    logger.info("Loaded %d plants from %s", len(registry), config_path)
    return registry


def load_preset(config_path: str, name: str, kind: Optional[PlantKind] = None) -> Plant:
    """Build the named preset, checking its kind when one is expected."""
    registry = build_registry(config_path)
    preset = registry.get(name)
    if preset is None:
        known = ", ".join(sorted(registry)) or "none"
        raise RegistryError(f"unknown preset {name!r} (known: {known})")
    if kind is not None and preset.kind != kind:
        raise RegistryError(f"preset {name} is a {preset.kind} description, expected {kind}")
    try:
        return preset.build()
    except EpsctlError:
        raise
    except (TypeError, ValueError) as e:
        raise RegistryError(f"preset {name}: {e}") from e
