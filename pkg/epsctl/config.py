"""Configuration for epsctl runs."""

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidConfig


def _float_env(name: str, default: str) -> float:
    raw = os.getenv(name, default)
    try:
        return float(raw)
    except ValueError as e:
        raise InvalidConfig(f"{name} must be a number, got {raw!r}") from e


def _int_env(name: str, default: str) -> int:
    raw = os.getenv(name, default)
    try:
        return int(raw)
    except ValueError as e:
        raise InvalidConfig(f"{name} must be an integer, got {raw!r}") from e


@dataclass
class Config:
    """Configuration loaded from environment variables."""

    # Analysis alpha grid (alpha_max <= 0 means "0.999 * (-2r)" of the analysed system)
    alpha_min: float = 1e-3
    alpha_max: float = 0.0
    alpha_points: int = 200

    # Synthesis alpha grid
    synth_alpha_min: float = 1e-3
    synth_alpha_max: float = 1e3

    # Tolerances
    refine_tol: float = 1e-6
    decay_tol: float = 1e-12
    grid_intervals: int = 16384

    # Set export
    polygon_dirs: int = 360

    # Output
    precision: int = 12

    # Named plants
    plants_file: str = "plants.yaml"

    # Logging
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "Config":
        """Load configuration from environment variables."""
        base = Path(__file__).parent.parent

        return cls(
            alpha_min=_float_env("EPSCTL_ALPHA_MIN", "1e-3"),
            alpha_max=_float_env("EPSCTL_ALPHA_MAX", "0"),
            alpha_points=_int_env("EPSCTL_ALPHA_POINTS", "200"),
            synth_alpha_min=_float_env("EPSCTL_SYNTH_ALPHA_MIN", "1e-3"),
            synth_alpha_max=_float_env("EPSCTL_SYNTH_ALPHA_MAX", "1e3"),
            refine_tol=_float_env("EPSCTL_REFINE_TOL", "1e-6"),
            decay_tol=_float_env("EPSCTL_DECAY_TOL", "1e-12"),
            grid_intervals=_int_env("EPSCTL_GRID_INTERVALS", "16384"),
            polygon_dirs=_int_env("EPSCTL_POLYGON_DIRS", "360"),
            precision=_int_env("EPSCTL_PRECISION", "12"),
            plants_file=os.getenv("EPSCTL_PLANTS", str(base / "plants.yaml")),
            log_level=os.getenv("EPSCTL_LOG", "WARNING"),
        )
