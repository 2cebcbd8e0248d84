"""
CLI configuration module for handling command-line arguments.

Click parses the flags; this module turns the parsed values into the dotted
overrides that ``load_config`` applies on top of every other source.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import yaml

from ..errors import ConfigError

# click parameter name -> dotted configuration key
OVERRIDE_KEYS = {
    "seed": "run.seed",
    "jobs": "run.jobs",
    "lenient": "paths.lenient",
    "output_dir": "paths.output_dir",
    "log_level": "app.log_level",
    "passages": "paths.passages",
    "index_path": "paths.index",
    "depth": "bm25.depth",
    "rm3": "rm3.enabled",
    "facet_k": "facet.k",
    "generator": "generator.kind",
    "answerer": "answerer.kind",
    "theta": "answerer.theta",
    "scorer": "scorer.kind",
    "t_max": "session.t_max",
    "facet_source": "session.facet_source",
    "max_pos": "augment.max_pos",
    "max_neg": "augment.max_neg",
    "threshold": "denoise.threshold",
    "denoise_scorer": "denoise.scorer",
    "rbo_p": "eval.rbo_p",
    "rbo_mode": "eval.rbo_mode",
}


def parse_set_options(options: Iterable[str]) -> Dict[str, Any]:
    """
    Parse ``--set key=value`` pairs into dotted overrides.

    Values are typed with YAML scalars, so ``bm25.k1=1.2`` yields a float and
    ``rm3.enabled=true`` a bool.
    """
    overrides = {}
    for option in options:
        key, sep, raw = option.partition("=")
        key = key.strip()
        if not sep or not key or "." not in key:
            raise ConfigError(f"expected section.key=value, got {option!r}")
        try:
            overrides[key.lower()] = yaml.safe_load(raw) if raw.strip() else ""
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse value for {key}: {e}") from e
    return overrides


class CLIConfigManager:
    """Manages CLI arguments and their integration with configuration."""

    def __init__(self, params: Optional[Mapping[str, Any]] = None):
        self.params: Dict[str, Any] = dict(params or {})

    def update(self, params: Mapping[str, Any]) -> "CLIConfigManager":
        """Merge parameters of a subcommand over the global ones."""
        self.params.update(params)
        return self

    def get_config_overrides(self) -> Dict[str, Any]:
        """
        Get configuration overrides from CLI arguments.

        Unset flags (None) never override a lower-precedence source.
        """
        overrides = {}
        if self.params.get("verbose"):
            overrides["app.log_level"] = "DEBUG"
        for name, key in OVERRIDE_KEYS.items():
            value = self.params.get(name)
            if value is not None:
                overrides[key] = value
        overrides.update(parse_set_options(self.params.get("set_options") or ()))
        return overrides

    def validate_args(self) -> List[str]:
        """
        Validate CLI arguments for conflicts and requirements.

        Returns:
            List of validation errors (empty if valid)
        """
        errors = []

        config_file = self.params.get("config_file")
        if config_file and not Path(config_file).is_file():
            errors.append(f"Configuration file does not exist: {config_file}")

        if self.params.get("verbose") and self.params.get("log_level") not in (None, "DEBUG"):
            errors.append("Cannot combine --verbose with --log-level other than DEBUG")

        jobs = self.params.get("jobs")
        if jobs is not None and jobs < 1:
            errors.append("--jobs must be at least 1")

        return errors


__all__ = ["CLIConfigManager", "OVERRIDE_KEYS", "parse_set_options"]
