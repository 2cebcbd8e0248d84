"""
Configuration utilities for clarisim.

Dumping and saving the effective configuration in the formats Dynaconf reads,
plus the canonical hash that identifies a run's effective configuration.
"""

import hashlib
from pathlib import Path
from typing import Any, Dict, Optional, Union

import orjson
import toml
import yaml

from ..errors import ConfigError
from .schema import ClarisimConfig

# Presentation-only settings that do not change any output
HASH_EXCLUDED = {
    "app": None,
    "run": {"jobs", "show_progress"},
}


def dump_config(config_data: Dict[str, Any], file_format: str = "toml") -> str:
    """Serialize configuration data as toml, yaml or json text."""
    if file_format == "toml":
        return toml.dumps(config_data)
    if file_format == "yaml":
        return yaml.safe_dump(config_data, default_flow_style=False, sort_keys=False)
    if file_format == "json":
        return orjson.dumps(config_data, option=orjson.OPT_INDENT_2).decode("utf-8")
    raise ConfigError(f"unsupported format: {file_format}")


def save_config_file(config_data: Dict[str, Any], file_path: Union[str, Path],
                     file_format: Optional[str] = None) -> Path:
    """
    Save configuration data to a file.

    The format is taken from the extension unless ``file_format`` is given.
    """
    file_path = Path(file_path)

    if file_format is None:
        file_extension = file_path.suffix.lower()
        if file_extension in [".yaml", ".yml"]:
            file_format = "yaml"
        elif file_extension == ".json":
            file_format = "json"
        else:
            file_format = "toml"

    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(dump_config(config_data, file_format), encoding="utf-8")
    return file_path


def canonical_config(config: ClarisimConfig) -> Dict[str, Any]:
    """Configuration as plain data without presentation-only settings."""
    data = config.model_dump(mode="json")
    for section, keys in HASH_EXCLUDED.items():
        if keys is None:
            data.pop(section, None)
        else:
            for key in keys:
                data.get(section, {}).pop(key, None)
    return data


def config_hash(config: ClarisimConfig) -> str:
    """Stable sha256 over the canonical configuration."""
    payload = orjson.dumps(canonical_config(config), option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(payload).hexdigest()


__all__ = [
    "dump_config",
    "save_config_file",
    "canonical_config",
    "config_hash",
]
