"""
Configuration module for clarisim.

This module layers configuration sources with Dynaconf and validates the
merged result into a typed ``ClarisimConfig``:
- settings.toml shipped next to this file
- local_settings.toml (gitignored local overrides)
- a file passed with --config-file
- CLARISIM_* environment variables (``__`` separates nested keys)
- CLI flags, applied last as dotted overrides
"""

from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dynaconf import Dynaconf, ValidationError, Validator

from ..errors import ConfigError
from .schema import ClarisimConfig, validate_config

# Get the config directory path
CONFIG_DIR = Path(__file__).parent
ROOT_DIR = CONFIG_DIR.parent.parent

ENVVAR_PREFIX = "CLARISIM"

# Cheap structural checks; ranges are enforced by the pydantic schema
VALIDATORS = [
    Validator("app.name", must_exist=True, is_type_of=str),
    Validator("run.seed", must_exist=True, is_type_of=int),
    Validator("paths.qrels_format", is_in=["trec_qrels", "hardneg_jsonl"]),
]


def build_settings(config_file: Optional[Union[str, Path]] = None) -> Dynaconf:
    """Create a Dynaconf instance over every configuration source."""
    settings_files = [
        str(CONFIG_DIR / "settings.toml"),
        str(CONFIG_DIR / "local_settings.toml"),  # Local overrides (gitignored)
    ]
    if config_file is not None:
        path = Path(config_file)
        if not path.is_file():
            raise ConfigError(f"configuration file not found: {path}")
        settings_files.append(str(path.resolve()))

    return Dynaconf(
        settings_files=settings_files,
        envvar_prefix=ENVVAR_PREFIX,
        environments=False,
        load_dotenv=True,
        merge_enabled=True,
        lowercase_read=True,
        root_path=ROOT_DIR,
        validators=VALIDATORS,
    )


def load_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ClarisimConfig:
    """
    Load, override and validate the effective configuration.

    Args:
        config_file: Optional extra TOML/YAML/JSON file layered over the defaults
        overrides: Dotted keys (``"bm25.k1"``) applied after every other source

    Raises:
        ConfigError: If a source is missing or the merged values are invalid
    """
    settings = build_settings(config_file)
    try:
        # first access loads every file and runs the validators
        data = settings_to_dict(settings)
    except (ValidationError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e

    for key, value in (overrides or {}).items():
        apply_override(data, key, value)
    return validate_config(data)


def apply_override(data: Dict[str, Any], dotted_key: str, value: Any) -> None:
    """Set ``section.key`` in a nested dict, creating sections as needed."""
    *sections, leaf = dotted_key.lower().split(".")
    node = data
    for section in sections:
        child = node.get(section)
        if not isinstance(child, dict):
            child = node[section] = {}
        node = child
    node[leaf] = value


def _lower_keys(data: Any) -> Any:
    """Lower-case dict keys recursively; an upper-cased duplicate wins over the lower-case one."""
    if not isinstance(data, dict):
        return data
    result: Dict[str, Any] = {}
    for key, value in data.items():
        lowered = key.lower() if isinstance(key, str) else key
        # environment variables arrive upper-cased next to the file's lower-case key
        if lowered in result and key == lowered:
            continue
        result[lowered] = _lower_keys(value)
    return result


def settings_to_dict(settings: Dynaconf) -> Dict[str, Any]:
    """Plain dict of the loaded settings with lowercase keys."""
    return _lower_keys(settings.as_dict())


# Export all public functions
__all__ = [
    "ClarisimConfig",
    "build_settings",
    "load_config",
    "apply_override",
    "settings_to_dict",
    "CONFIG_DIR",
    "ROOT_DIR",
]
