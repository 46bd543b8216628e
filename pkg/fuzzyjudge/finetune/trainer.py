"""Supervised multi-task fine-tuning and checkpoint prediction.

A checkpoint directory holds ``config.json`` (backend, backbone and training
settings), the backend's weights blob, ``rubric.json`` (fingerprint of the
rubric it was trained against) and ``train_run.jsonl`` (per-epoch metrics).
"""

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..annotation import LabeledExample
from ..backend.contracts import (
    BackendFailure,
    CheckpointNotFound,
    ClassifierBackend,
    ClassifierBackendRef,
    Distributions,
    predict_distributions,
)
from ..corpus import TextItem
from ..errors import FuzzyJudgeError
from ..judgment import CriterionJudgment, JudgmentResult, JudgmentSource
from ..rubric import CRITERIA_ORDER, CriterionId, LevelIndex, describe_rubric, rubric_fingerprint
from ..utils.artifacts import build_meta, read_json, read_jsonl, write_json, write_jsonl

DEFAULT_BACKBONE = "google-bert/bert-base-uncased"

CONFIG_FILE = "config.json"
RUBRIC_FILE = "rubric.json"
TRAIN_RUN_FILE = "train_run.jsonl"

PREDICT_CHUNK = 64


class EmptyDataset(FuzzyJudgeError):
    """Raised when a required dataset has no examples."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"The {name} set is empty")


class RubricMismatch(FuzzyJudgeError):
    """Raised when a checkpoint was trained against a different rubric."""

    def __init__(self, location: str, stored: str, current: str):
        self.location = location
        self.stored = stored
        self.current = current
        super().__init__(
            f"Checkpoint {location} was trained against rubric {stored}, current rubric is {current}"
        )


class InvalidTrainConfig(FuzzyJudgeError):
    """Raised for training hyperparameters outside their valid range."""


@dataclass(frozen=True)
class TrainConfig:
    backbone_id: str = DEFAULT_BACKBONE
    learning_rate: float = 2e-5
    batch_size: int = 16
    epochs: int = 3
    seed: int = 13
    max_sequence_length: int = 128

    def __post_init__(self) -> None:
        if not self.backbone_id.strip():
            raise InvalidTrainConfig("backbone_id must be non-empty")
        if not self.learning_rate > 0:
            raise InvalidTrainConfig(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidTrainConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise InvalidTrainConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.max_sequence_length < 1:
            raise InvalidTrainConfig(
                f"max_sequence_length must be >= 1, got {self.max_sequence_length}"
            )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "TrainConfig":
        return cls(
            backbone_id=str(values["backbone_id"]),
            learning_rate=float(values["learning_rate"]),
            batch_size=int(values["batch_size"]),
            epochs=int(values["epochs"]),
            seed=int(values["seed"]),
            max_sequence_length=int(values["max_sequence_length"]),
        )


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: Mapping[CriterionId, float]

    @property
    def mean_val_accuracy(self) -> float:
        return math.fsum(self.val_accuracy[c] for c in CRITERIA_ORDER) / len(CRITERIA_ORDER)

    def to_record(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_accuracy": {c.value: self.val_accuracy[c] for c in CRITERIA_ORDER},
            "mean_val_accuracy": self.mean_val_accuracy,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "EpochRecord":
        return cls(
            epoch=int(record["epoch"]),
            train_loss=float(record["train_loss"]),
            val_accuracy={c: float(record["val_accuracy"][c.value]) for c in CRITERIA_ORDER},
        )


@dataclass(frozen=True)
class TrainRun:
    config: TrainConfig
    epochs: tuple[EpochRecord, ...]
    best_epoch: int
    checkpoint: ClassifierBackendRef

    @property
    def train_losses(self) -> list[float]:
        return [e.train_loss for e in self.epochs]

    @property
    def best(self) -> EpochRecord:
        return next(e for e in self.epochs if e.epoch == self.best_epoch)


EpochCallback = Callable[[EpochRecord], None]


def _predicted_levels(distributions: Distributions) -> dict[CriterionId, tuple[int, float]]:
    """Argmax (first index on ties) and its probability, per criterion."""
    result = {}
    for criterion in CRITERIA_ORDER:
        vector = np.asarray(distributions[criterion], dtype=np.float64)
        index = int(np.argmax(vector))
        result[criterion] = (index, float(vector[index]))
    return result


def _predict_all(
    backend: ClassifierBackend, texts: Sequence[str], chunk: int = PREDICT_CHUNK
) -> list[Distributions]:
    results: list[Distributions] = []
    for start in range(0, len(texts), chunk):
        results.extend(predict_distributions(backend, None, texts[start : start + chunk]))
    return results


def validation_accuracy(
    backend: ClassifierBackend, examples: Sequence[LabeledExample]
) -> dict[CriterionId, float]:
    distributions = _predict_all(backend, [e.text for e in examples])
    correct = {c: 0 for c in CRITERIA_ORDER}
    for example, dists in zip(examples, distributions, strict=True):
        predicted = _predicted_levels(dists)
        for criterion in CRITERIA_ORDER:
            if predicted[criterion][0] == example.gold[criterion].index:
                correct[criterion] += 1
    return {c: correct[c] / len(examples) for c in CRITERIA_ORDER}


def train(
    train_set: Sequence[LabeledExample],
    val_set: Sequence[LabeledExample],
    config: TrainConfig,
    backend: ClassifierBackend,
    checkpoint_dir: Path,
    on_epoch: Optional[EpochCallback] = None,
    config_snapshot: Optional[Mapping[str, Any]] = None,
) -> TrainRun:
    """Mini-batch fine-tuning on the sum of the four head losses.

    After each epoch the model is scored on the validation set; the weights
    are saved whenever the mean validation accuracy strictly improves, so the
    checkpoint holds the earliest best epoch.

    Raises:
        EmptyDataset: If the train or validation set is empty
        BackendFailure: If the backend fails or reports a non-finite loss
    """
    if not train_set:
        raise EmptyDataset("train")
    if not val_set:
        raise EmptyDataset("validation")

    checkpoint_dir.mkdir(parents=True, exist_ok=True)
    # An interrupted run must not leave a loadable checkpoint behind.
    (checkpoint_dir / CONFIG_FILE).unlink(missing_ok=True)

    backend.initialize(config)
    name = backend.get_backend_name()
    rng = np.random.default_rng(config.seed)
    texts = [e.text for e in train_set]
    labels = [list(e.label_vector()) for e in train_set]

    records: list[EpochRecord] = []
    best_epoch = 0
    best_score = -math.inf
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        batch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = [int(i) for i in order[start : start + config.batch_size]]
            loss = backend.train_step([texts[i] for i in batch], [labels[i] for i in batch])
            if not math.isfinite(loss):
                raise BackendFailure(f"non-finite training loss at epoch {epoch}", name)
            batch_losses.append(loss)

        record = EpochRecord(
            epoch=epoch,
            train_loss=math.fsum(batch_losses) / len(batch_losses),
            val_accuracy=validation_accuracy(backend, val_set),
        )
        records.append(record)
        if record.mean_val_accuracy > best_score:
            best_score = record.mean_val_accuracy
            best_epoch = epoch
            backend.save(checkpoint_dir)
        if on_epoch is not None:
            on_epoch(record)

    ref = ClassifierBackendRef(
        backbone_id=config.backbone_id,
        checkpoint_location=str(checkpoint_dir),
        backend_name=name,
    )
    run = TrainRun(config=config, epochs=tuple(records), best_epoch=best_epoch, checkpoint=ref)
    _write_checkpoint_metadata(run, config_snapshot or {})
    return run


def _write_checkpoint_metadata(run: TrainRun, snapshot: Mapping[str, Any]) -> None:
    directory = run.checkpoint.path
    write_jsonl(
        directory / TRAIN_RUN_FILE,
        (e.to_record() for e in run.epochs),
        build_meta("train_run", snapshot) | {"best_epoch": run.best_epoch},
    )
    write_json(directory / RUBRIC_FILE, describe_rubric(), build_meta("rubric", snapshot))
    write_json(
        directory / CONFIG_FILE,
        {
            "backend": run.checkpoint.backend_name,
            "backbone_id": run.config.backbone_id,
            "train_config": run.config.to_dict(),
            "best_epoch": run.best_epoch,
        },
        build_meta("checkpoint", snapshot),
    )


def open_checkpoint(directory: Path) -> ClassifierBackendRef:
    """Reference to a completed checkpoint.

    Raises:
        CheckpointNotFound: If the directory or its config record is missing
        RubricMismatch: If the stored rubric fingerprint differs from the
            current one
    """
    if not (directory / CONFIG_FILE).exists():
        raise CheckpointNotFound(str(directory))
    _, config = read_json(directory / CONFIG_FILE)
    check_rubric(directory)
    return ClassifierBackendRef(
        backbone_id=str(config["backbone_id"]),
        checkpoint_location=str(directory),
        backend_name=str(config["backend"]),
    )


def check_rubric(directory: Path) -> None:
    if not (directory / RUBRIC_FILE).exists():
        raise CheckpointNotFound(str(directory), f"missing {RUBRIC_FILE}")
    _, stored = read_json(directory / RUBRIC_FILE)
    current = rubric_fingerprint()
    if stored.get("fingerprint") != current:
        raise RubricMismatch(str(directory), str(stored.get("fingerprint")), current)


def load_train_run(directory: Path) -> TrainRun:
    ref = open_checkpoint(directory)
    _, config = read_json(directory / CONFIG_FILE)
    meta, records = read_jsonl(directory / TRAIN_RUN_FILE)
    epochs = tuple(EpochRecord.from_record(r) for r in records)
    return TrainRun(
        config=TrainConfig.from_dict(config["train_config"]),
        epochs=epochs,
        best_epoch=int(meta.get("best_epoch", config.get("best_epoch", 0))),
        checkpoint=ref,
    )


def judgment_from_distributions(item: TextItem, distributions: Distributions) -> JudgmentResult:
    judgments = {}
    for criterion, (index, probability) in _predicted_levels(distributions).items():
        judgments[criterion] = CriterionJudgment(
            level=LevelIndex(criterion, index),
            confidence=min(probability, 1.0),
        )
    return JudgmentResult(
        utterance_id=item.utterance_id,
        text=item.text,
        judgments=judgments,
        source=JudgmentSource.SFT,
    )


def predict(
    ref: ClassifierBackendRef,
    utterances: Sequence[TextItem],
    backend: ClassifierBackend,
) -> list[JudgmentResult]:
    """Classifier judgments: argmax level and its probability per criterion.

    Raises:
        CheckpointNotFound: If the checkpoint is missing
        RubricMismatch: If it was trained against another rubric
    """
    check_rubric(ref.path)
    backend.load(ref)
    distributions = _predict_all(backend, [u.text for u in utterances])
    return [
        judgment_from_distributions(item, dists)
        for item, dists in zip(utterances, distributions, strict=True)
    ]
