"""
Result rendering for the nahkit command line.

Results are plain dicts of JSON-ready values: exact rationals are already
strings, and floats may only sit under keys ending in "_approx".
"""

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jinja2

from .consts import APPROX_SUFFIX
from .exceptions import InvariantViolation, ValidationError

TEMPLATE_DIR = Path(__file__).parent / "templates"


@dataclass
class ReportConfig:
    """Configuration for result rendering."""

    template_dir: Path = TEMPLATE_DIR
    template_name: str = "report.jinja"


def check_exact(value: Any, key: str = "") -> None:
    """Refuse floats outside "_approx" keys."""
    if isinstance(value, float):
        if not key.endswith(APPROX_SUFFIX):
            raise InvariantViolation(f"floating point value under exact key {key!r}")
        if not math.isfinite(value):
            raise InvariantViolation(f"non-finite value under {key!r}")
    elif isinstance(value, dict):
        for k, v in value.items():
            check_exact(v, str(k))
    elif isinstance(value, (list, tuple)):
        for v in value:
            check_exact(v, key)


class Renderer(ABC):
    """Abstract base class for result renderers."""

    def __init__(self, config: ReportConfig | None = None):
        self.config = config or ReportConfig()

    @abstractmethod
    def render(self, command: str, result: Any) -> str:
        """Render one command result."""
        pass


class JSONRenderer(Renderer):
    """Compact deterministic JSON, one document per line."""

    def render(self, command: str, result: Any) -> str:
        check_exact(result)
        return json.dumps(result, sort_keys=True, separators=(",", ":")) + "\n"


def flatten(value: Any, prefix: str = "") -> list[tuple[str, str]]:
    """Dotted-key rows for nested dicts and lists."""
    if isinstance(value, dict):
        rows = []
        for k in sorted(value, key=str):
            rows += flatten(value[k], f"{prefix}.{k}" if prefix else str(k))
        return rows
    if isinstance(value, (list, tuple)) and any(
        isinstance(v, (dict, list, tuple)) for v in value
    ):
        rows = []
        for i, v in enumerate(value):
            rows += flatten(v, f"{prefix}[{i}]")
        return rows
    if isinstance(value, (list, tuple)):
        return [(prefix, "[" + ", ".join(str(v) for v in value) + "]")]
    if isinstance(value, bool):
        return [(prefix, "yes" if value else "no")]
    if isinstance(value, float):
        return [(prefix, f"{value:.12g}")]
    return [(prefix, str(value))]


class TextRenderer(Renderer):
    """Aligned key/value listing through a Jinja2 template."""

    def __init__(self, config: ReportConfig | None = None):
        super().__init__(config)
        self._env: jinja2.Environment | None = None

    @property
    def env(self) -> jinja2.Environment:
        """Lazy-loaded Jinja2 environment."""
        if self._env is None:
            self._env = jinja2.Environment(
                loader=jinja2.FileSystemLoader([str(self.config.template_dir)]),
                trim_blocks=True,
                lstrip_blocks=True,
                keep_trailing_newline=True,
            )
        return self._env

    def render(self, command: str, result: Any) -> str:
        check_exact(result)
        rows = flatten(result)
        width = max((len(k) for k, _ in rows), default=0)
        template = self.env.get_template(self.config.template_name)
        return template.render(command=command, rows=rows, width=width)


def get_renderer(fmt: str, config: ReportConfig | None = None) -> Renderer:
    """Factory function to get the renderer for an output format.

    Args:
        fmt: "json" or "text"
        config: Optional rendering configuration

    Returns:
        Renderer instance for the format

    Raises:
        ValidationError: If the format is unknown
    """
    renderers = {
        "json": JSONRenderer,
        "text": TextRenderer,
    }
    if fmt not in renderers:
        valid = ", ".join(sorted(renderers))
        raise ValidationError(f"Unknown output format '{fmt}'. Valid: {valid}")
    return renderers[fmt](config)
