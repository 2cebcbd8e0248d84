"""
Configuration schema validation using Pydantic.

Every numeric range is checked here, so the rest of the package can trust the
values it receives.
"""

from typing import Any, Dict, List, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class AppConfig(_Section):
    """Application configuration schema."""
    name: str = Field("clarisim", description="Application name")
    version: str = Field("0.1.0", description="Application version")
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field("INFO")
    colored_logs: bool = Field(True)


class PathsConfig(_Section):
    """Input collection and output locations."""
    passages: str = Field("data/toy/passages.tsv")
    queries: str = Field("data/toy/queries.tsv")
    qrels: str = Field("data/toy/qrels.txt")
    qrels_format: Literal["trec_qrels", "hardneg_jsonl"] = Field("trec_qrels")
    output_dir: str = Field("output")
    index: str = Field("output/index.json")
    lenient: bool = Field(False, description="Drop qrels lines with unknown ids instead of failing")

    @field_validator("passages", "queries", "output_dir", "index")
    @classmethod
    def validate_paths(cls, v):
        """Ensure paths are non-empty."""
        if not v:
            raise ValueError("Path cannot be empty")
        return v


class AnalyzerConfig(_Section):
    min_token_length: int = Field(2, ge=1)
    remove_stopwords: bool = Field(True)


class BM25Config(_Section):
    k1: float = Field(0.9, gt=0)
    b: float = Field(0.4, ge=0, le=1)
    depth: int = Field(100, ge=1)


class RM3Config(_Section):
    enabled: bool = Field(False)
    fb_docs: int = Field(10, ge=1)
    fb_terms: int = Field(10, ge=1)
    mix: float = Field(0.5, ge=0, le=1)


class FacetConfig(_Section):
    k: int = Field(5, ge=1)


class EmbeddingConfig(_Section):
    provider: Literal["local", "remote"] = Field("local")
    dim: int = Field(512, ge=1)
    seed: int = Field(13, ge=0)
    ngram_min: int = Field(3, ge=1)
    ngram_max: int = Field(5, ge=1)
    batch_size: int = Field(32, ge=1)

    @model_validator(mode="after")
    def validate_ngram_range(self):
        if self.ngram_min > self.ngram_max:
            raise ValueError("ngram_min must not exceed ngram_max")
        return self


class GatewayConfig(_Section):
    """Model gateway endpoint and transport policy."""
    url: str = Field("http://127.0.0.1:8080")
    timeout_ms: int = Field(30000, gt=0)
    retries: int = Field(3, ge=0)
    backoff_factor: float = Field(0.5, ge=0)
    nucleus_p: float = Field(0.95, gt=0, le=1)
    max_in_flight: int = Field(8, ge=1)


class GeneratorConfig(_Section):
    kind: Literal["template", "remote"] = Field("template")
    fallback_to_template: bool = Field(True)


class AnswererConfig(_Section):
    kind: Literal["heuristic", "lexical_sim", "remote"] = Field("lexical_sim")
    theta: float = Field(0.6, ge=0, le=1)


class ScorerConfig(_Section):
    kind: Literal["local", "remote"] = Field("local")
    alpha: float = Field(1.0)
    beta: float = Field(2.0)


class SessionConfig(_Section):
    t_max: int = Field(5, ge=1)
    facet_source: Literal["updated", "initial"] = Field("updated")


class AugmentConfig(_Section):
    max_pos: int = Field(0, ge=0, description="0 keeps every positive")
    max_neg: int = Field(0, ge=0, description="0 keeps every negative")
    online_top_n: int = Field(1, ge=1)
    online_flop_n: int = Field(0, ge=0)


class DenoiseConfig(_Section):
    scorer: Literal["local", "remote"] = Field("local")
    threshold: float = Field(0.95)


class EvalConfig(_Section):
    k_values: List[int] = Field(default_factory=lambda: [1, 3, 10])
    mrr_k: int = Field(10, ge=1)
    rbo_p: float = Field(0.9, gt=0, lt=1)
    rbo_mode: Literal["min", "ext"] = Field("ext")

    @field_validator("k_values")
    @classmethod
    def validate_k_values(cls, v):
        if not v or any(k < 1 for k in v):
            raise ValueError("k_values must be a non-empty list of positive integers")
        return sorted(set(v))


class RunConfig(_Section):
    seed: int = Field(42)
    jobs: int = Field(1, ge=1)
    show_progress: bool = Field(True)


class ClarisimConfig(BaseModel):
    """Main configuration schema."""
    model_config = ConfigDict(extra="ignore", validate_assignment=True)

    app: AppConfig = Field(default_factory=AppConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    analyzer: AnalyzerConfig = Field(default_factory=AnalyzerConfig)
    bm25: BM25Config = Field(default_factory=BM25Config)
    rm3: RM3Config = Field(default_factory=RM3Config)
    facet: FacetConfig = Field(default_factory=FacetConfig)
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)
    gateway: GatewayConfig = Field(default_factory=GatewayConfig)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    answerer: AnswererConfig = Field(default_factory=AnswererConfig)
    scorer: ScorerConfig = Field(default_factory=ScorerConfig)
    session: SessionConfig = Field(default_factory=SessionConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    denoise: DenoiseConfig = Field(default_factory=DenoiseConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    run: RunConfig = Field(default_factory=RunConfig)


def validate_config(config_dict: Dict[str, Any]) -> ClarisimConfig:
    """
    Validate configuration dictionary against schema.

    Raises:
        ConfigError: If configuration is invalid
    """
    try:
        return ClarisimConfig.model_validate(config_dict)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration:\n{e}") from e


__all__ = [
    "ClarisimConfig",
    "validate_config",
    "AppConfig",
    "PathsConfig",
    "AnalyzerConfig",
    "BM25Config",
    "RM3Config",
    "FacetConfig",
    "EmbeddingConfig",
    "GatewayConfig",
    "GeneratorConfig",
    "AnswererConfig",
    "ScorerConfig",
    "SessionConfig",
    "AugmentConfig",
    "DenoiseConfig",
    "EvalConfig",
    "RunConfig",
]
