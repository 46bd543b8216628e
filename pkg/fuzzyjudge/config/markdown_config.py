"""Reading ``fuzzyjudge.md`` configuration files."""

from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from pyparsing import (
    Optional as Opt,
    ParseException,
    Regex,
    Suppress,
    Word,
    alphanums,
    alphas,
    rest_of_line,
)

from ..annotation import BadSpec, SplitMode, SplitSpec
from ..errors import FuzzyJudgeError
from ..finetune.trainer import TrainConfig
from ..judge import HybridPolicy
from ..prompting.exemplars import ExemplarStrategy
from ..utils.project_root import find_config_file
from .models import (
    AnnotationConfig,
    BackendConfig,
    ConfigError,
    CorpusConfig,
    PathsConfig,
    PipelineConfig,
    PromptConfig,
)


@dataclass
class Section:
    """A top-level ``# title`` section of the configuration document."""

    title: str
    lines: list[tuple[int, str]]
    line_number: int


@dataclass(frozen=True)
class ConfigItem:
    key: str
    value: str
    line_number: int


class ConfigGrammar:
    """Grammar for one ``- `key`=`value` `` item, with an optional ``: comment`` tail."""

    def __init__(self) -> None:
        backtick = Suppress("`")
        key = Word(alphas, alphanums + "_-")
        value = Regex(r"[^`]*")
        comment = Suppress(":") + rest_of_line

        self.item = (
            Suppress("-")
            + backtick + key("key") + backtick
            + Suppress("=")
            + backtick + value("value") + backtick
            + Opt(comment)
        )

    def parse_item(self, line: str) -> Optional[tuple[str, str]]:
        try:
            result = self.item.parse_string(line.strip(), parse_all=True)
        except ParseException:
            return None
        return str(result["key"]), str(result.get("value", ""))


GRAMMAR = ConfigGrammar()


def extract_sections(content: str) -> list[Section]:
    """Split a document into top-level sections, skipping fenced code blocks."""
    sections: list[Section] = []
    current: Optional[Section] = None
    in_code_block = False

    for idx, line in enumerate(content.splitlines(), start=1):
        if line.strip().startswith("```"):
            in_code_block = not in_code_block
            continue
        if in_code_block:
            continue
        if line.startswith("# "):
            current = Section(title=line[2:].strip(), lines=[], line_number=idx)
            sections.append(current)
            continue
        if current is not None:
            current.lines.append((idx, line))

    return sections


def parse_items(section: Section, file_path: Path) -> list[ConfigItem]:
    """Key/value items of a section; other prose lines are ignored.

    Raises:
        ConfigError: If a list item is not a valid key/value item, or a key repeats
    """
    items: list[ConfigItem] = []
    seen: dict[str, int] = {}
    for line_number, raw in section.lines:
        stripped = raw.strip()
        if not stripped.startswith("-"):
            continue
        parsed = GRAMMAR.parse_item(stripped)
        if parsed is None:
            raise ConfigError(f"Invalid item '{stripped}', expected - `key`=`value`", file_path, line_number)
        key, value = parsed
        normalized = key.lower().replace("_", "-")
        if normalized in seen:
            raise ConfigError(
                f"Duplicate key '{key}' in section '{section.title}' (first on line {seen[normalized]})",
                file_path,
                line_number,
            )
        seen[normalized] = line_number
        items.append(ConfigItem(normalized, value.strip(), line_number))
    return items


def _optional_path(value: str) -> Optional[Path]:
    return Path(value) if value else None


def _optional_str(value: str) -> Optional[str]:
    return value or None


def _phrases(value: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in value.split("|") if p.strip())


def _number(value: str) -> float:
    return float(value)


Converter = Callable[[str], Any]

# section -> key -> (field name, converter)
SCHEMA: dict[str, dict[str, tuple[str, Converter]]] = {
    "paths": {
        "conversations": ("conversations", _optional_path),
        "annotations": ("annotations", _optional_path),
        "workspace": ("workspace", Path),
        "exemplars": ("exemplars", _optional_path),
        "template": ("template", _optional_path),
    },
    "corpus": {
        "bootstrap-phrases": ("bootstrap_phrases", _phrases),
    },
    "annotation": {
        "expected-judges": ("expected_judges", int),
    },
    "split": {
        "mode": ("mode", str),
        "train": ("train", _number),
        "val": ("val", _number),
        "test": ("test", _number),
        "seed": ("seed", int),
    },
    "train": {
        "backbone": ("backbone_id", str),
        "learning-rate": ("learning_rate", float),
        "batch-size": ("batch_size", int),
        "epochs": ("epochs", int),
        "seed": ("seed", int),
        "max-sequence-length": ("max_sequence_length", int),
    },
    "prompt": {
        "k": ("k", int),
        "strategy": ("strategy", ExemplarStrategy.from_string),
        "seed": ("seed", int),
        "retries": ("retries", int),
        "max-output-length": ("max_output_length", int),
        "temperature": ("temperature", float),
        "concurrency": ("concurrency", int),
    },
    "hybrid": {
        "confidence-threshold": ("confidence_threshold", float),
    },
    "backend": {
        "classifier": ("classifier", str),
        "generator": ("generator", _optional_str),
        "model": ("model", str),
        "base-url": ("base_url", _optional_str),
        "api-key-env": ("api_key_env", str),
        "timeout": ("timeout", float),
        "device": ("device", _optional_str),
        "dimensions": ("dimensions", int),
    },
}


def split_spec_from_values(
    sizes: tuple[float, float, float], seed: int, mode: Optional[str] = None
) -> SplitSpec:
    """Build a split spec; without an explicit mode, whole numbers mean counts.

    Raises:
        BadSpec: If the sizes do not describe a valid split
    """
    if mode is None:
        whole = all(float(s).is_integer() and s >= 0 for s in sizes) and sum(sizes) > 1
        split_mode = SplitMode.EXACT_COUNTS if whole else SplitMode.FRACTIONS
    else:
        normalized = mode.strip().lower().replace("-", "_")
        if normalized in ("counts", "exact_counts"):
            split_mode = SplitMode.EXACT_COUNTS
        elif normalized == "fractions":
            split_mode = SplitMode.FRACTIONS
        else:
            raise BadSpec(f"Invalid split mode: {mode}. Valid modes: fractions, counts")
    if split_mode is SplitMode.EXACT_COUNTS:
        return SplitSpec.from_counts(int(sizes[0]), int(sizes[1]), int(sizes[2]), seed)
    return SplitSpec.from_fractions(sizes[0], sizes[1], sizes[2], seed)


def _convert_section(
    section: Section, file_path: Path
) -> tuple[dict[str, Any], dict[str, int]]:
    schema = SCHEMA[section.title.lower()]
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for item in parse_items(section, file_path):
        if item.key not in schema:
            valid = ", ".join(sorted(schema))
            raise ConfigError(
                f"Unknown key '{item.key}' in section '{section.title}'. Valid keys: {valid}",
                file_path,
                item.line_number,
            )
        field_name, convert = schema[item.key]
        try:
            values[field_name] = convert(item.value)
        except ValueError as exc:
            raise ConfigError(f"Invalid value for '{item.key}': {exc}", file_path, item.line_number) from exc
        lines[field_name] = item.line_number
    return values, lines


def parse_config(content: str, file_path: Path, root: Optional[Path] = None) -> PipelineConfig:
    """Parse configuration text into a ``PipelineConfig``.

    Missing sections and keys keep their defaults.

    Raises:
        ConfigError: On unknown sections or keys and invalid values, with file and line
    """
    found: dict[str, tuple[dict[str, Any], dict[str, int], int]] = {}
    for section in extract_sections(content):
        name = section.title.lower()
        if name not in SCHEMA:
            valid = ", ".join(SCHEMA)
            raise ConfigError(
                f"Unknown section '{section.title}'. Valid sections: {valid}",
                file_path,
                section.line_number,
            )
        if name in found:
            raise ConfigError(f"Duplicate section '{section.title}'", file_path, section.line_number)
        values, lines = _convert_section(section, file_path)
        found[name] = (values, lines, section.line_number)

    def build(name: str, factory: Callable[..., Any], defaults: Any) -> Any:
        if name not in found:
            return defaults
        values, _, line = found[name]
        try:
            return factory(**values)
        except FuzzyJudgeError as exc:
            raise ConfigError(str(exc), file_path, line) from exc

    split = SplitSpec()
    if "split" in found:
        values, _, line = found["split"]
        sizes = (
            float(values.get("train", split.sizes[0])),
            float(values.get("val", split.sizes[1])),
            float(values.get("test", split.sizes[2])),
        )
        try:
            split = split_spec_from_values(sizes, int(values.get("seed", split.seed)), values.get("mode"))
        except BadSpec as exc:
            raise ConfigError(str(exc), file_path, line) from exc

    return PipelineConfig(
        root=(root or file_path.parent).resolve(),
        paths=build("paths", PathsConfig, PathsConfig()),
        corpus=build("corpus", CorpusConfig, CorpusConfig()),
        annotation=build("annotation", AnnotationConfig, AnnotationConfig()),
        split=split,
        train=build("train", TrainConfig, TrainConfig()),
        prompt=build("prompt", PromptConfig, PromptConfig()),
        hybrid=build("hybrid", HybridPolicy, HybridPolicy()),
        backend=build("backend", BackendConfig, BackendConfig()),
        source=file_path,
    )


def load_config(file_path: Path) -> PipelineConfig:
    """Load a configuration file; its directory is the project root.

    Raises:
        ConfigError: If the file is missing or invalid
    """
    if not file_path.is_file():
        raise ConfigError("Configuration file not found", file_path)
    return parse_config(file_path.read_text(encoding="utf-8"), file_path)


def discover_config(start: Optional[Path] = None, explicit: Optional[Path] = None) -> PipelineConfig:
    """Explicit file, else the nearest ``fuzzyjudge.md`` upwards, else defaults."""
    if explicit is not None:
        return load_config(explicit)
    found = find_config_file(start)
    if found is not None:
        return load_config(found)
    return PipelineConfig(root=(start or Path.cwd()).resolve())
