"""Run configuration for nahkit.

This module provides the Pydantic model for the optional nahkit.yaml file
holding solver defaults, and the merge of command-line overrides into it.
"""

from fractions import Fraction
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, field_serializer, field_validator
from sympy import isprime

from .consts import (
    COM_MAX_SWEEPS,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_PLACE,
    DEFAULT_TOL,
    GRID_BITS,
    GRID_BITS_MAX,
    GRID_BITS_MIN,
)
from .exceptions import ConfigError
from .sanitize import format_rational, parse_rational


class RunConfig(BaseModel):
    """Solver and output settings shared by every subcommand."""

    place: int = DEFAULT_PLACE
    tol: Fraction = DEFAULT_TOL
    max_sweeps: int = Field(default=DEFAULT_MAX_SWEEPS, alias="max-sweeps")
    com_max_sweeps: int = Field(default=COM_MAX_SWEEPS, alias="com-max-sweeps")
    jobs: int = 1
    format: Literal["json", "text"] = "json"
    grid_bits: int = Field(default=GRID_BITS, alias="grid-bits")

    model_config = {"populate_by_name": True, "arbitrary_types_allowed": True}

    @field_validator("place", mode="before")
    @classmethod
    def place_must_be_prime(cls, v: Any) -> int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"place must be an integer, got {type(v).__name__}")
        if v < 2 or not isprime(v):
            raise ValueError(f"p must be a prime, got {v}")
        return v

    @field_validator("tol", mode="before")
    @classmethod
    def tol_must_be_positive(cls, v: Any) -> Fraction:
        tol = parse_rational(v)
        if tol <= 0:
            raise ValueError(f"tol must be positive, got {format_rational(tol)}")
        return tol

    @field_validator("max_sweeps", "com_max_sweeps", "jobs")
    @classmethod
    def count_must_be_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"must be at least 1, got {v}")
        return v

    @field_validator("grid_bits")
    @classmethod
    def validate_grid_bits(cls, v: int) -> int:
        if not GRID_BITS_MIN <= v <= GRID_BITS_MAX:
            raise ValueError(
                f"grid-bits must lie in {GRID_BITS_MIN}..{GRID_BITS_MAX}, got {v}"
            )
        return v

    @field_serializer("tol")
    def serialize_tol(self, tol: Fraction) -> str:
        return format_rational(tol)


def load_config(path: str | Path) -> RunConfig:
    """Load and validate configuration from a YAML file.

    Args:
        path: Path to the configuration file (typically nahkit.yaml)

    Returns:
        Validated RunConfig instance

    Raises:
        ConfigError: If the file cannot be read or validation fails
    """
    from yaml import YAMLError, safe_load

    path = Path(path)

    try:
        with open(path) as f:
            data = safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    except YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}")

    if data is None:
        raise ConfigError(f"Config file is empty: {path}")

    try:
        return RunConfig.model_validate(data)
    except Exception as e:
        raise ConfigError(f"Invalid configuration in {path}: {e}") from e


def merge_overrides(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Apply command-line values that were given explicitly (not None)."""
    given = {k: v for k, v in overrides.items() if v is not None}
    if not given:
        return config
    data = config.model_dump()
    data.update(given)
    try:
        return RunConfig.model_validate(data)
    except Exception as e:
        raise ConfigError(f"Invalid command-line setting: {e}") from e
