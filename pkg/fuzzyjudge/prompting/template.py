"""Few-shot prompt rendering from an external Jinja2 template."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateError

from ..errors import FuzzyJudgeError
from ..rubric import CRITERIA_ORDER, CriterionId, LevelIndex, criteria_registry, get_criterion, parse_level

TEMPLATES_DIR = Path(__file__).parent / "templates"
DEFAULT_TEMPLATE = TEMPLATES_DIR / "fuzzy_judge.md.j2"


class TemplateFailure(FuzzyJudgeError):
    """Raised when the prompt template cannot be loaded or rendered."""


def single_line(text: str) -> str:
    """Collapse all internal whitespace so an utterance renders on one line."""
    return " ".join(text.split())


@dataclass(frozen=True)
class Exemplar:
    """An annotated utterance shown to the model as a worked example."""

    text: str
    labels: Mapping[CriterionId, LevelIndex]

    def __post_init__(self) -> None:
        missing = [c.value for c in CRITERIA_ORDER if c not in self.labels]
        if missing:
            raise ValueError(f"exemplar lacks criteria: {', '.join(missing)}")

    @classmethod
    def from_names(cls, text: str, names: Sequence[str]) -> "Exemplar":
        """Build from four level names in registry order."""
        return cls(
            text=text,
            labels={c: parse_level(c, name) for c, name in zip(CRITERIA_ORDER, names, strict=True)},
        )

    def level_names(self) -> tuple[str, ...]:
        return tuple(self.labels[c].name for c in CRITERIA_ORDER)

    def to_record(self) -> dict[str, Any]:
        return {"text": self.text, "labels": {c.value: self.labels[c].name for c in CRITERIA_ORDER}}

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Exemplar":
        labels = {CriterionId.from_string(k): v for k, v in record["labels"].items()}
        return cls(
            text=str(record["text"]),
            labels={c: parse_level(c, str(labels[c])) for c in CRITERIA_ORDER if c in labels},
        )


class PromptTemplate:
    """Instruction header, numbered exemplar blocks and the target block."""

    def __init__(self, path: Optional[Path] = None):
        self.path = path or DEFAULT_TEMPLATE
        if not self.path.is_file():
            raise TemplateFailure(f"Prompt template not found: {self.path}")
        environment = Environment(
            loader=FileSystemLoader(str(self.path.parent)),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            autoescape=False,
        )
        try:
            self._template = environment.get_template(self.path.name)
        except TemplateError as exc:
            raise TemplateFailure(f"Cannot load prompt template {self.path}: {exc}") from exc

    def render(self, exemplars: Sequence[Exemplar], target_text: str) -> str:
        context = {
            "criteria": criteria_registry(),
            "exemplars": [
                {
                    "text": single_line(e.text),
                    "labels": [
                        {"criterion": get_criterion(c).display_name, "level": e.labels[c].name}
                        for c in CRITERIA_ORDER
                    ],
                }
                for e in exemplars
            ],
            "target": single_line(target_text),
        }
        try:
            return self._template.render(**context)
        except TemplateError as exc:
            raise TemplateFailure(f"Cannot render prompt template {self.path}: {exc}") from exc


_default_template: Optional[PromptTemplate] = None


def default_template() -> PromptTemplate:
    global _default_template
    if _default_template is None:
        _default_template = PromptTemplate()
    return _default_template


def render_prompt(
    exemplars: Sequence[Exemplar],
    target: Any,
    template: Optional[PromptTemplate] = None,
) -> str:
    """Render the judging prompt for ``target`` (an utterance or its text).

    Raises:
        ValueError: If the target text is empty
    """
    text = target if isinstance(target, str) else target.text
    if not text.strip():
        raise ValueError("target utterance text is empty")
    return (template or default_template()).render(exemplars, text)
