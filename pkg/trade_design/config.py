"""Settings - CLI defaults read from a ``[trade-design]`` TOML table."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from .equilibrium import DEFAULT_TREMBLE_INDICES
from .geometry import DEFAULT_LAMBDA_GRID
from .models import SearchConfig

DEFAULT_SETTINGS_FILE = "trade-design.toml"
SECTION = "trade-design"


class SettingsError(ValueError):
    """Raised when a settings file is unreadable or has unknown keys."""


@dataclass(frozen=True)
class Settings:
    """Defaults shared by the CLI commands."""

    tolerance: float = 1e-9
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID
    sentinel_fraction: float = 1e-3
    epsilon: float = 0.05
    n_list: Tuple[int, ...] = DEFAULT_TREMBLE_INDICES
    search: SearchConfig = field(default_factory=SearchConfig)


def _load_toml(path: Path) -> Dict[str, Any]:
    try:
        import tomllib  # py311+
    except ModuleNotFoundError:  # pragma: no cover
        import tomli as tomllib  # type: ignore

    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except OSError as e:
        raise SettingsError(f"cannot read {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise SettingsError(f"invalid TOML in {path}: {e}") from e


def _search_config(raw: Any) -> SearchConfig:
    if not isinstance(raw, dict):
        raise SettingsError("'search' must be a table")
    known = {f.name for f in fields(SearchConfig)}
    unknown = set(raw) - known
    if unknown:
        raise SettingsError(f"unknown search keys: {', '.join(sorted(unknown))}")
    values = dict(raw)
    if values.get("price_grid") is not None:
        values["price_grid"] = tuple(float(p) for p in values["price_grid"])
    return replace(SearchConfig(), **values)


def settings_from_mapping(data: Dict[str, Any]) -> Settings:
    """Build settings from the contents of a ``[trade-design]`` table."""
    known = {f.name for f in fields(Settings)}
    unknown = set(data) - known
    if unknown:
        raise SettingsError(f"unknown settings: {', '.join(sorted(unknown))}")
    values: Dict[str, Any] = {}
    try:
        if "tolerance" in data:
            values["tolerance"] = float(data["tolerance"])
        if "sentinel_fraction" in data:
            values["sentinel_fraction"] = float(data["sentinel_fraction"])
        if "epsilon" in data:
            values["epsilon"] = float(data["epsilon"])
        if "lambda_grid" in data:
            values["lambda_grid"] = tuple(float(x) for x in data["lambda_grid"])
        if "n_list" in data:
            values["n_list"] = tuple(int(x) for x in data["n_list"])
    except (TypeError, ValueError) as e:
        raise SettingsError(f"bad setting value: {e}") from e
    if "search" in data:
        values["search"] = _search_config(data["search"])
    return Settings(**values)


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """Load settings from ``path``, or ``./trade-design.toml`` when present."""
    if path is None:
        default = Path.cwd() / DEFAULT_SETTINGS_FILE
        if not default.exists():
            return Settings()
        path = default
    data = _load_toml(Path(path))
    section = data.get(SECTION, {})
    if not isinstance(section, dict):
        raise SettingsError(f"[{SECTION}] must be a table")
    return settings_from_mapping(section)
