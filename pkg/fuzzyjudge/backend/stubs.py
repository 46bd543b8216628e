"""Deterministic in-process backends for tests and dry runs."""

import hashlib
import json
import math
import threading
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Union

from ..rubric import CRITERIA_ORDER, get_criterion
from .contracts import (
    BackendFailure,
    CheckpointNotFound,
    ClassifierBackend,
    ClassifierBackendRef,
    Distributions,
    GenerationRequest,
    GeneratorBackend,
)

if TYPE_CHECKING:
    from ..finetune.trainer import TrainConfig

STUB_WEIGHTS_FILE = "weights.json"


def uniform_distributions() -> Distributions:
    return {c: [1.0 / get_criterion(c).level_count] * get_criterion(c).level_count for c in CRITERIA_ORDER}


class UniformClassifier(ClassifierBackend):
    """Predicts the uniform distribution on every head; training is a no-op."""

    def get_backend_name(self) -> str:
        return "uniform"

    def initialize(self, config: "TrainConfig") -> None:
        pass

    def train_step(self, texts: Sequence[str], gold: Sequence[Sequence[int]]) -> float:
        return math.fsum(math.log(get_criterion(c).level_count) for c in CRITERIA_ORDER)

    def predict_distributions(self, texts: Sequence[str]) -> list[Distributions]:
        return [uniform_distributions() for _ in texts]

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / STUB_WEIGHTS_FILE).write_text(
            json.dumps({"backend": "uniform"}, sort_keys=True) + "\n", encoding="utf-8"
        )

    def load(self, ref: ClassifierBackendRef) -> None:
        if not (ref.path / STUB_WEIGHTS_FILE).exists():
            raise CheckpointNotFound(str(ref.path), f"missing {STUB_WEIGHTS_FILE}")


class LookupClassifier(ClassifierBackend):
    """Returns canned distributions per text, uniform for unknown texts."""

    def __init__(self, table: Optional[Mapping[str, Distributions]] = None):
        self._table: dict[str, Distributions] = dict(table or {})

    def get_backend_name(self) -> str:
        return "lookup"

    def initialize(self, config: "TrainConfig") -> None:
        pass

    def train_step(self, texts: Sequence[str], gold: Sequence[Sequence[int]]) -> float:
        total = 0.0
        for dists, labels in zip(self.predict_distributions(texts), gold, strict=True):
            for criterion, level in zip(CRITERIA_ORDER, labels, strict=True):
                total -= math.log(max(dists[criterion][level], 1e-12))
        return total / max(len(texts), 1)

    def predict_distributions(self, texts: Sequence[str]) -> list[Distributions]:
        return [self._table.get(text, uniform_distributions()) for text in texts]

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        table = {text: {c.value: v for c, v in d.items()} for text, d in self._table.items()}
        (directory / STUB_WEIGHTS_FILE).write_text(
            json.dumps({"backend": "lookup", "table": table}, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def load(self, ref: ClassifierBackendRef) -> None:
        blob = ref.path / STUB_WEIGHTS_FILE
        if not blob.exists():
            raise CheckpointNotFound(str(ref.path), f"missing {STUB_WEIGHTS_FILE}")
        stored = json.loads(blob.read_text(encoding="utf-8")).get("table", {})
        self._table = {
            text: {c: list(values[c.value]) for c in CRITERIA_ORDER}
            for text, values in stored.items()
        }


class EchoGenerator(GeneratorBackend):
    """Returns the last non-empty line of the prompt."""

    def get_backend_name(self) -> str:
        return "echo"

    def complete(self, request: GenerationRequest) -> str:
        for line in reversed(request.prompt.splitlines()):
            if line.strip():
                return line
        return ""


Reply = Union[str, Exception]


class ScriptedGenerator(GeneratorBackend):
    """Plays back replies in order, repeating the last one.

    Exception entries are raised instead of returned.
    """

    def __init__(self, replies: Sequence[Reply] = ()):
        if not replies:
            replies = ("",)
        self._replies = list(replies)
        self._lock = threading.Lock()
        self.calls = 0
        self.prompts: list[str] = []

    def get_backend_name(self) -> str:
        return "scripted"

    def complete(self, request: GenerationRequest) -> str:
        with self._lock:
            reply = self._replies[min(self.calls, len(self._replies) - 1)]
            self.calls += 1
            self.prompts.append(request.prompt)
        if isinstance(reply, Exception):
            raise reply
        return reply


class RubricStubGenerator(GeneratorBackend):
    """Answers every prompt with a well-formed label block.

    Levels are derived from a hash of the target utterance, so the same
    target always gets the same labels.
    """

    def __init__(self, seed: int = 0):
        self._seed = seed

    def get_backend_name(self) -> str:
        return "rubric-stub"

    @staticmethod
    def target_text(prompt: str) -> str:
        for line in reversed(prompt.splitlines()):
            if line.strip().startswith("Student:"):
                return line.strip()
        raise BackendFailure("prompt has no 'Student:' line", "rubric-stub")

    def levels_for(self, prompt: str) -> list[int]:
        digest = hashlib.sha256(f"{self._seed}:{self.target_text(prompt)}".encode("utf-8")).digest()
        return [
            digest[position] % get_criterion(c).level_count
            for position, c in enumerate(CRITERIA_ORDER)
        ]

    def complete(self, request: GenerationRequest) -> str:
        lines = []
        for criterion, index in zip(CRITERIA_ORDER, self.levels_for(request.prompt), strict=True):
            spec = get_criterion(criterion)
            lines.append(f"{spec.display_name}: {spec.levels[index]}")
        return "\n".join(lines) + "\n"
