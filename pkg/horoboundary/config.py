"""Run configuration for the horoboundary pipeline.

Settings are loaded in priority order:
  1. Keyword overrides (CLI flags)
  2. ``key = value`` config file passed with ``--config``
  3. Environment variables prefixed ``HOROBOUNDARY_`` and the .env file
  4. Field defaults

Usage::

    from horoboundary.config import load_run_config

    cfg = load_run_config(None, {"source": "free:2", "tree_depth": 5})
    print(cfg.effective_radius)
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from horoboundary.errors import InputFormatError

logger: logging.Logger = logging.getLogger(__name__)

MIN_AUTO_RADIUS = 8


class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="HOROBOUNDARY_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="forbid",
    )

    source: str = Field(
        "tiling:4,5",
        description="Graph source: tiling:<p>,<q>, free:<rank>, line, or a path to an edge file.",
    )
    radius: int | None = Field(
        None,
        ge=0,
        description="Ball radius R; defaults to max(8, tree_depth + horizon + 1).",
    )
    tree_depth: int = Field(4, ge=1, description="Depth N of the tree of atoms.")
    horizon: int = Field(4, ge=1, description="Horizon H deciding whether an atom is infinite.")
    delta: int | None = Field(
        None, ge=0, description="Hyperbolicity constant; estimated from the ball when absent."
    )
    delta_radius: int = Field(2, ge=0, description="Radius used by the delta estimator.")
    cone_depth: int = Field(3, ge=0, description="Truncation depth for cone comparisons.")
    equivalence_depth: int = Field(
        3, ge=1, description="Relative depth to which morphisms are verified on members."
    )
    transducer_depth: int = Field(
        10, ge=1, description="Word length used for bounded transducer equivalence."
    )
    faithfulness_radius: int = Field(
        2, ge=0, description="Radius on which two group elements are compared."
    )
    state_bound: int = Field(500, ge=1, description="Maximum number of synthesized states.")
    horizon_audit: bool = Field(
        True, description="Compare infinite flags at horizons H and H + 1 while building the tree."
    )
    seed: int = Field(0, description="Seed for the sampled verification checks.")
    output_dir: Path = Field(Path("artifacts"), description="Directory for artifacts.")

    @property
    def effective_radius(self) -> int:
        if self.radius is not None:
            return self.radius
        # the horizon audit at level N reads one sphere past N + H
        extra = 1 if self.horizon_audit else 0
        return max(MIN_AUTO_RADIUS, self.tree_depth + self.horizon + extra)

    @model_validator(mode="after")
    def _check_radius(self) -> RunConfig:
        if self.radius is not None and self.radius < self.tree_depth + self.horizon:
            raise ValueError(
                f"radius {self.radius} is smaller than tree_depth + horizon "
                f"({self.tree_depth} + {self.horizon})"
            )
        return self


def read_config_file(path: Path) -> dict[str, str]:
    """Parse a ``key = value`` config file into a dict of raw strings."""
    known = set(RunConfig.model_fields)
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise InputFormatError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        if key not in known:
            raise InputFormatError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def load_run_config(path: Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from an optional file plus explicit overrides.

    ``None`` values in *overrides* are treated as "not given" so that argparse
    namespaces can be passed through unchanged.
    """
    merged: dict[str, Any] = {}
    if path is not None:
        merged.update(read_config_file(path))
        logger.info("Loaded config file", extra={"config_path": str(path)})
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    return RunConfig(**merged)
