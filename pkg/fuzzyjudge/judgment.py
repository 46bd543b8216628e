"""Judgment records shared by the classifier, prompt and hybrid paths."""

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

from .corpus import MalformedRow
from .rubric import CRITERIA_ORDER, CriterionId, LevelIndex, level_name
from .utils.artifacts import read_jsonl, write_jsonl


class JudgmentSource(Enum):
    SFT = "sft"
    PROMPT = "prompt"
    HYBRID = "hybrid"

    @classmethod
    def from_string(cls, value: str) -> "JudgmentSource":
        try:
            return cls(value.strip().lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"Invalid judging mode: {value}. Valid modes: {valid}") from None


@dataclass(frozen=True)
class CriterionJudgment:
    """Predicted level for one criterion; confidence is None when unavailable."""

    level: LevelIndex
    confidence: Optional[float] = None

    def __post_init__(self) -> None:
        if self.confidence is not None and not 0.0 < self.confidence <= 1.0:
            raise ValueError(f"confidence must be in (0, 1], got {self.confidence}")


@dataclass(frozen=True)
class JudgmentResult:
    utterance_id: str
    text: str
    judgments: Mapping[CriterionId, CriterionJudgment]
    source: JudgmentSource
    low_confidence_flags: frozenset[CriterionId] = field(default_factory=frozenset)
    prompt_calls: int = 0

    def __post_init__(self) -> None:
        missing = [c.value for c in CRITERIA_ORDER if c not in self.judgments]
        if missing:
            raise MalformedRow(
                0, f"judgment for '{self.utterance_id}' lacks criteria: {', '.join(missing)}"
            )

    def level(self, criterion: CriterionId) -> int:
        return self.judgments[criterion].level.index

    def level_vector(self) -> tuple[int, ...]:
        return tuple(self.level(c) for c in CRITERIA_ORDER)

    def confidence(self, criterion: CriterionId) -> Optional[float]:
        return self.judgments[criterion].confidence

    def to_record(self) -> dict[str, Any]:
        return {
            "utterance_id": self.utterance_id,
            "text": self.text,
            "source": self.source.value,
            "judgments": {
                c.value: {
                    "level": self.level(c),
                    "name": level_name(c, self.level(c)),
                    "confidence": self.confidence(c),
                }
                for c in CRITERIA_ORDER
            },
            "flags": [c.value for c in CRITERIA_ORDER if c in self.low_confidence_flags],
            "prompt_calls": self.prompt_calls,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "JudgmentResult":
        judgments = {}
        for criterion in CRITERIA_ORDER:
            entry = record["judgments"][criterion.value]
            confidence = entry.get("confidence")
            judgments[criterion] = CriterionJudgment(
                level=LevelIndex(criterion, int(entry["level"])),
                confidence=None if confidence is None else float(confidence),
            )
        return cls(
            utterance_id=str(record["utterance_id"]),
            text=str(record.get("text", "")),
            judgments=judgments,
            source=JudgmentSource(record["source"]),
            low_confidence_flags=frozenset(CriterionId.from_string(c) for c in record.get("flags", [])),
            prompt_calls=int(record.get("prompt_calls", 0)),
        )


@dataclass(frozen=True)
class JudgmentError:
    """Per-utterance failure recorded in place of a judgment."""

    utterance_id: str
    text: str
    error_type: str
    message: str

    @classmethod
    def from_exception(cls, utterance_id: str, text: str, exc: BaseException) -> "JudgmentError":
        return cls(utterance_id, text, type(exc).__name__, str(exc))

    def to_record(self) -> dict[str, Any]:
        return {
            "utterance_id": self.utterance_id,
            "text": self.text,
            "error": {"type": self.error_type, "message": self.message},
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "JudgmentError":
        error = record["error"]
        return cls(
            utterance_id=str(record["utterance_id"]),
            text=str(record.get("text", "")),
            error_type=str(error.get("type", "")),
            message=str(error.get("message", "")),
        )


JudgmentEntry = Union[JudgmentResult, JudgmentError]


def split_entries(entries: Iterable[JudgmentEntry]) -> tuple[list[JudgmentResult], list[JudgmentError]]:
    results: list[JudgmentResult] = []
    errors: list[JudgmentError] = []
    for entry in entries:
        if isinstance(entry, JudgmentError):
            errors.append(entry)
        else:
            results.append(entry)
    return results, errors


def write_judgments(path: Path, entries: Iterable[JudgmentEntry], meta: Mapping[str, Any]) -> int:
    return write_jsonl(path, (e.to_record() for e in entries), meta)


def read_judgments(path: Path) -> list[JudgmentEntry]:
    _, records = read_jsonl(path)
    return [
        JudgmentError.from_record(r) if "error" in r else JudgmentResult.from_record(r)
        for r in records
    ]
