"""In-process hashed bag-of-words classifier with four softmax heads.

Fully deterministic: parameters start at zero and updates are plain
mini-batch gradient descent, so two runs with the same batches produce the
same loss curve. Used for tests and CPU smoke runs.
"""

import re
import zlib
from collections.abc import Sequence
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

import numpy as np
import numpy.typing as npt

from ..finetune.loss import head_cross_entropy
from ..rubric import CRITERIA_ORDER, CriterionId, get_criterion
from .contracts import (
    BackendFailure,
    CheckpointNotFound,
    ClassifierBackend,
    ClassifierBackendRef,
    Distributions,
)

if TYPE_CHECKING:
    from ..finetune.trainer import TrainConfig

WEIGHTS_FILE = "weights.npz"

_TOKEN = re.compile(r"[a-z0-9']+")

FloatArray = npt.NDArray[np.float64]


def softmax(logits: FloatArray) -> FloatArray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class BagOfWordsClassifier(ClassifierBackend):
    """Linear softmax heads over L2-normalized hashed token counts."""

    def __init__(self, dimensions: int = 4096, max_sequence_length: Optional[int] = None):
        self._dimensions = dimensions
        self._max_tokens = max_sequence_length
        self._learning_rate = 0.0
        self._weights: dict[CriterionId, FloatArray] = {}
        self._bias: dict[CriterionId, FloatArray] = {}

    def get_backend_name(self) -> str:
        return "bow"

    def initialize(self, config: "TrainConfig") -> None:
        self._learning_rate = config.learning_rate
        self._max_tokens = config.max_sequence_length
        self._weights = {
            c: np.zeros((self._dimensions, get_criterion(c).level_count)) for c in CRITERIA_ORDER
        }
        self._bias = {c: np.zeros(get_criterion(c).level_count) for c in CRITERIA_ORDER}

    def featurize(self, texts: Sequence[str]) -> FloatArray:
        features = np.zeros((len(texts), self._dimensions))
        for row, text in enumerate(texts):
            tokens = _TOKEN.findall(text.casefold())
            if self._max_tokens is not None:
                tokens = tokens[: self._max_tokens]
            for token in tokens:
                features[row, zlib.crc32(token.encode("utf-8")) % self._dimensions] += 1.0
        norms = np.linalg.norm(features, axis=1, keepdims=True)
        return features / np.where(norms == 0.0, 1.0, norms)

    def _require_weights(self) -> None:
        if not self._weights:
            raise BackendFailure("classifier has no parameters; initialize or load first", "bow")

    def _head_probabilities(self, features: FloatArray, criterion: CriterionId) -> FloatArray:
        return softmax(features @ self._weights[criterion] + self._bias[criterion])

    def train_step(self, texts: Sequence[str], gold: Sequence[Sequence[int]]) -> float:
        self._require_weights()
        features = self.featurize(texts)
        labels = np.asarray(gold, dtype=np.int64)
        batch = len(texts)
        total = 0.0
        for position, criterion in enumerate(CRITERIA_ORDER):
            probabilities = self._head_probabilities(features, criterion)
            targets = labels[:, position]
            total += float(head_cross_entropy(probabilities, targets).mean())
            gradient = probabilities.copy()
            gradient[np.arange(batch), targets] -= 1.0
            self._weights[criterion] -= self._learning_rate * (features.T @ gradient) / batch
            self._bias[criterion] -= self._learning_rate * gradient.mean(axis=0)
        return total

    def predict_distributions(self, texts: Sequence[str]) -> list[Distributions]:
        self._require_weights()
        features = self.featurize(texts)
        heads = {c: self._head_probabilities(features, c) for c in CRITERIA_ORDER}
        return [{c: heads[c][row].tolist() for c in CRITERIA_ORDER} for row in range(len(texts))]

    def save(self, directory: Path) -> None:
        self._require_weights()
        directory.mkdir(parents=True, exist_ok=True)
        arrays: dict[str, npt.NDArray[Any]] = {}
        for criterion in CRITERIA_ORDER:
            arrays[f"{criterion.value}.weight"] = self._weights[criterion]
            arrays[f"{criterion.value}.bias"] = self._bias[criterion]
        arrays["max_tokens"] = np.array(self._max_tokens if self._max_tokens is not None else -1)
        np.savez(directory / WEIGHTS_FILE, **arrays)

    def load(self, ref: ClassifierBackendRef) -> None:
        blob = ref.path / WEIGHTS_FILE
        if not blob.exists():
            raise CheckpointNotFound(str(ref.path), f"missing {WEIGHTS_FILE}")
        with np.load(blob) as arrays:
            self._weights = {c: arrays[f"{c.value}.weight"].copy() for c in CRITERIA_ORDER}
            self._bias = {c: arrays[f"{c.value}.bias"].copy() for c in CRITERIA_ORDER}
            max_tokens = int(arrays["max_tokens"]) if "max_tokens" in arrays else -1
        self._max_tokens = max_tokens if max_tokens > 0 else None
        self._dimensions = next(iter(self._weights.values())).shape[0]
