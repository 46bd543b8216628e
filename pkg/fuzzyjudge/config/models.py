"""Pipeline configuration tree."""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from ..annotation import DEFAULT_EXPECTED_JUDGES, SplitSpec
from ..backend.remote import DEFAULT_API_KEY_ENV
from ..corpus import DEFAULT_BOOTSTRAP_PHRASES
from ..errors import FuzzyJudgeError
from ..finetune.trainer import TrainConfig
from ..judge import DEFAULT_CONCURRENCY, HybridPolicy
from ..prompting.exemplars import ExemplarStrategy
from ..prompting.runner import DEFAULT_RETRIES

DEFAULT_WORKSPACE = ".fzj"


class ConfigError(FuzzyJudgeError):
    """Raised for an invalid configuration file or value."""

    def __init__(self, message: str, file: Optional[Path] = None, line: Optional[int] = None):
        self.file = file
        self.line = line
        if file is not None and line is not None:
            message = f"{file}:{line}: {message}"
        elif file is not None:
            message = f"{file}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class PathsConfig:
    """Input and workspace locations, relative to the project root unless absolute."""

    conversations: Optional[Path] = None
    """Raw conversation export (CSV)"""

    annotations: Optional[Path] = None
    """Directory holding one annotation CSV per judge"""

    workspace: Path = Path(DEFAULT_WORKSPACE)

    exemplars: Optional[Path] = None
    """Curated exemplar list for the fixed strategy (JSONL)"""

    template: Optional[Path] = None
    """Prompt template overriding the packaged one"""

    def resolve(self, root: Path) -> "PathsConfig":
        def absolute(path: Optional[Path]) -> Optional[Path]:
            if path is None:
                return None
            return path if path.is_absolute() else root / path

        workspace = absolute(self.workspace)
        assert workspace is not None
        return PathsConfig(
            conversations=absolute(self.conversations),
            annotations=absolute(self.annotations),
            workspace=workspace,
            exemplars=absolute(self.exemplars),
            template=absolute(self.template),
        )


@dataclass(frozen=True)
class CorpusConfig:
    bootstrap_phrases: tuple[str, ...] = DEFAULT_BOOTSTRAP_PHRASES


@dataclass(frozen=True)
class AnnotationConfig:
    expected_judges: int = DEFAULT_EXPECTED_JUDGES

    def __post_init__(self) -> None:
        if self.expected_judges < 1:
            raise ConfigError(f"expected-judges must be >= 1, got {self.expected_judges}")


@dataclass(frozen=True)
class PromptConfig:
    k: int = 2
    strategy: ExemplarStrategy = ExemplarStrategy.FIXED
    seed: int = 0
    retries: int = DEFAULT_RETRIES
    max_output_length: int = 128
    temperature: float = 0.0
    concurrency: int = DEFAULT_CONCURRENCY

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ConfigError(f"k must be >= 0, got {self.k}")
        if self.retries < 1:
            raise ConfigError(f"retries must be >= 1, got {self.retries}")
        if self.max_output_length < 1:
            raise ConfigError(f"max-output-length must be >= 1, got {self.max_output_length}")
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.concurrency < 1:
            raise ConfigError(f"concurrency must be >= 1, got {self.concurrency}")


@dataclass(frozen=True)
class BackendConfig:
    """Which classifier and generator backends to use, and how to reach them.

    Only the name of the environment variable holding the API key is stored.
    """

    classifier: str = "transformers"
    generator: Optional[str] = None
    model: str = ""
    base_url: Optional[str] = None
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 30.0
    device: Optional[str] = None
    dimensions: int = 4096

    def classifier_options(self, train: TrainConfig) -> dict[str, Any]:
        if self.classifier == "bow":
            return {"dimensions": self.dimensions, "max_sequence_length": train.max_sequence_length}
        if self.classifier == "transformers":
            return {"device": self.device}
        return {}

    def generator_options(self, retries: int) -> dict[str, Any]:
        if self.generator == "remote":
            return {
                "model": self.model,
                "base_url": self.base_url,
                "api_key_env": self.api_key_env,
                "retries": retries,
                "timeout": self.timeout,
            }
        if self.generator == "local":
            return {"model": self.model, "device_map": self.device or "auto"}
        return {}


@dataclass(frozen=True)
class PipelineConfig:
    """Full configuration of one project."""

    root: Path
    paths: PathsConfig = field(default_factory=PathsConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    annotation: AnnotationConfig = field(default_factory=AnnotationConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    prompt: PromptConfig = field(default_factory=PromptConfig)
    hybrid: HybridPolicy = field(default_factory=HybridPolicy)
    backend: BackendConfig = field(default_factory=BackendConfig)
    source: Optional[Path] = None
    """Configuration file the values came from, if any"""

    @property
    def resolved_paths(self) -> PathsConfig:
        return self.paths.resolve(self.root)

    @property
    def workspace(self) -> Path:
        return self.resolved_paths.workspace

    def with_section(self, name: str, **values: Any) -> "PipelineConfig":
        """Copy with some fields of one section replaced (flag overrides)."""
        current = getattr(self, name)
        changed = {k: v for k, v in values.items() if v is not None}
        if not changed:
            return self
        return replace(self, **{name: replace(current, **changed)})

    def snapshot(self) -> dict[str, Any]:
        """JSON-safe view embedded in artifacts.

        Paths are kept as configured so snapshots do not depend on where the
        project lives.
        """

        def path(value: Optional[Path]) -> Optional[str]:
            return None if value is None else value.as_posix()

        return {
            "paths": {
                "conversations": path(self.paths.conversations),
                "annotations": path(self.paths.annotations),
                "workspace": path(self.paths.workspace),
                "exemplars": path(self.paths.exemplars),
                "template": path(self.paths.template),
            },
            "corpus": {"bootstrap_phrases": list(self.corpus.bootstrap_phrases)},
            "annotation": {"expected_judges": self.annotation.expected_judges},
            "split": self.split.describe(),
            "train": self.train.to_dict(),
            "prompt": {
                "k": self.prompt.k,
                "strategy": self.prompt.strategy.value,
                "seed": self.prompt.seed,
                "retries": self.prompt.retries,
                "max_output_length": self.prompt.max_output_length,
                "temperature": self.prompt.temperature,
                "concurrency": self.prompt.concurrency,
            },
            "hybrid": {"confidence_threshold": self.hybrid.confidence_threshold},
            "backend": {
                "classifier": self.backend.classifier,
                "generator": self.backend.generator,
                "model": self.backend.model,
                "base_url": self.backend.base_url,
                "api_key_env": self.backend.api_key_env,
                "timeout": self.backend.timeout,
                "device": self.backend.device,
                "dimensions": self.backend.dimensions,
            },
        }

