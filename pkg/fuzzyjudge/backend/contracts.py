"""Model backend contracts.

A classifier backend owns a trainable four-head model; a generator backend
turns a prompt into completion text. Concrete backends live next to this
module and are looked up by name through ``BackendRegistry``.
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Optional

from ..errors import FuzzyJudgeError
from ..rubric import CRITERIA_ORDER, CriterionId, get_criterion

if TYPE_CHECKING:
    from ..finetune.trainer import TrainConfig

# A probability vector over one criterion's levels, keyed by criterion.
Distributions = dict[CriterionId, list[float]]

DISTRIBUTION_TOLERANCE = 1e-6


class BackendFailure(FuzzyJudgeError):
    """Raised when a backend cannot serve a request or breaks its contract."""

    def __init__(self, detail: str, backend: Optional[str] = None):
        self.detail = detail
        self.backend = backend
        prefix = f"[{backend}] " if backend else ""
        super().__init__(f"{prefix}{detail}")


class CheckpointNotFound(FuzzyJudgeError):
    """Raised when a checkpoint directory is missing or incomplete."""

    def __init__(self, location: str, reason: str = "no checkpoint"):
        self.location = location
        self.reason = reason
        super().__init__(f"{reason}: {location}")


class GenerationTimeout(BackendFailure):
    """Raised when a generation request exceeds its time limit."""


@dataclass(frozen=True)
class ClassifierBackendRef:
    """Pointer to a trained classifier checkpoint."""

    backbone_id: str
    checkpoint_location: str
    backend_name: str = "bow"

    def __post_init__(self) -> None:
        if not self.backbone_id.strip():
            raise ValueError("backbone_id must be non-empty")

    @property
    def path(self) -> Path:
        return Path(self.checkpoint_location)


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_output_length: int = 128
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_output_length <= 0:
            raise ValueError(f"max_output_length must be positive, got {self.max_output_length}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be non-negative, got {self.temperature}")


class ClassifierBackend(ABC):
    """A trainable text classifier with one softmax head per criterion."""

    @abstractmethod
    def get_backend_name(self) -> str:
        """Return the registry name of this backend (e.g. 'bow')."""
        pass

    @property
    def single_flight(self) -> bool:
        """Whether calls must be serialized by the caller."""
        return False

    @abstractmethod
    def initialize(self, config: "TrainConfig") -> None:
        """Create fresh, untrained parameters for ``config``."""
        pass

    @abstractmethod
    def train_step(self, texts: Sequence[str], gold: Sequence[Sequence[int]]) -> float:
        """Run one optimization step on a mini-batch.

        Args:
            texts: Utterance texts of the batch
            gold: Gold level indices per text, in registry order

        Returns:
            Mean multi-task loss of the batch before the update
        """
        pass

    @abstractmethod
    def predict_distributions(self, texts: Sequence[str]) -> list[Distributions]:
        """Per-criterion level distributions for each text, in input order."""
        pass

    @abstractmethod
    def save(self, directory: Path) -> None:
        """Write the weights blob into a checkpoint directory."""
        pass

    @abstractmethod
    def load(self, ref: ClassifierBackendRef) -> None:
        """Restore weights from a checkpoint.

        Raises:
            CheckpointNotFound: If the weights blob is missing
        """
        pass


class GeneratorBackend(ABC):
    """Free-text completion used by the prompt path."""

    @abstractmethod
    def get_backend_name(self) -> str:
        pass

    @property
    def single_flight(self) -> bool:
        return False

    @abstractmethod
    def complete(self, request: GenerationRequest) -> str:
        """Return raw completion text for the request; no parsing here.

        Raises:
            BackendFailure: If the backend cannot produce a completion
            GenerationTimeout: If the request timed out
        """
        pass


def validate_distributions(
    results: Sequence[Distributions],
    expected: int,
    backend: Optional[str] = None,
) -> list[Distributions]:
    """Check a batch of backend outputs against the distribution contract.

    Raises:
        BackendFailure: On a length mismatch, missing head, wrong vector
            length, negative or non-finite entry, or a sum off by more than
            1e-6
    """
    if len(results) != expected:
        raise BackendFailure(f"expected {expected} results, got {len(results)}", backend)
    for position, result in enumerate(results):
        for criterion in CRITERIA_ORDER:
            vector = result.get(criterion)
            if vector is None:
                raise BackendFailure(f"result {position} lacks head '{criterion.value}'", backend)
            width = get_criterion(criterion).level_count
            if len(vector) != width:
                raise BackendFailure(
                    f"result {position} head '{criterion.value}' has {len(vector)} entries, "
                    f"expected {width}",
                    backend,
                )
            if any(not math.isfinite(p) or p < 0 for p in vector):
                raise BackendFailure(
                    f"result {position} head '{criterion.value}' is not a distribution", backend
                )
            total = math.fsum(vector)
            if abs(total - 1.0) > DISTRIBUTION_TOLERANCE:
                raise BackendFailure(
                    f"result {position} head '{criterion.value}' sums to {total:.8f}", backend
                )
    return list(results)


def predict_distributions(
    backend: ClassifierBackend,
    ref: Optional[ClassifierBackendRef],
    texts: Sequence[str],
) -> list[Distributions]:
    """Load ``ref`` (when given) and predict, enforcing the output contract.

    Raises:
        CheckpointNotFound: If the checkpoint cannot be loaded
        BackendFailure: If the backend fails or violates the contract
    """
    name = backend.get_backend_name()
    if ref is not None:
        backend.load(ref)
    if not texts:
        return []
    try:
        results = backend.predict_distributions(list(texts))
    except FuzzyJudgeError:
        raise
    except Exception as exc:
        raise BackendFailure(f"prediction failed: {exc}", name) from exc
    return validate_distributions(results, len(texts), name)


def generate(backend: GeneratorBackend, request: GenerationRequest) -> str:
    """Complete a prompt; any failure surfaces as ``BackendFailure``.

    Raises:
        BackendFailure: If the backend fails
    """
    try:
        return backend.complete(request)
    except FuzzyJudgeError:
        raise
    except Exception as exc:
        raise BackendFailure(f"generation failed: {exc}", backend.get_backend_name()) from exc
