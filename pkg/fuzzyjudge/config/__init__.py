"""Pipeline configuration: models and the Markdown configuration file."""

from .markdown_config import discover_config, load_config, parse_config, split_spec_from_values
from .models import (
    AnnotationConfig,
    BackendConfig,
    ConfigError,
    CorpusConfig,
    PathsConfig,
    PipelineConfig,
    PromptConfig,
)

__all__ = [
    "AnnotationConfig",
    "BackendConfig",
    "ConfigError",
    "CorpusConfig",
    "PathsConfig",
    "PipelineConfig",
    "PromptConfig",
    "discover_config",
    "load_config",
    "parse_config",
    "split_spec_from_values",
]
