"""Choosing the annotated examples shown in a few-shot prompt."""

import warnings
from collections.abc import Sequence
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from ..annotation import LabeledExample
from ..errors import FuzzyJudgeError
from ..rubric import CriterionId
from ..utils.artifacts import read_jsonl
from .template import Exemplar, single_line

BUILTIN_EXEMPLARS: tuple[Exemplar, ...] = (
    Exemplar.from_names(
        "Describe this dizziness - does it feel like the room was spinning "
        "or just like a fading to black",
        ("Appropriate", "Relevant", "Safe", "Not distracting"),
    ),
    Exemplar.from_names(
        "im asking you that idiot",
        ("Unprofessional", "Irrelevant", "Mostly safe", "Moderately distracting"),
    ),
)


class NotEnoughExamples(FuzzyJudgeError):
    """Raised when more exemplars are requested than are available."""

    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(f"Requested {requested} exemplars, only {available} available")


class ExemplarStrategy(Enum):
    FIXED = "fixed"
    RANDOM_SEEDED = "random_seeded"

    @classmethod
    def from_string(cls, value: str) -> "ExemplarStrategy":
        normalized = value.strip().lower().replace("-", "_")
        try:
            return cls(normalized)
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"Invalid exemplar strategy: {value}. Valid strategies: {valid}") from None


def _professionalism_levels(exemplars: Sequence[Exemplar]) -> set[int]:
    return {e.labels[CriterionId.PROFESSIONALISM].index for e in exemplars}


def exemplar_from_example(example: LabeledExample) -> Exemplar:
    return Exemplar(text=single_line(example.text), labels=dict(example.gold))


def select_exemplars(
    train_set: Sequence[LabeledExample],
    k: int,
    strategy: ExemplarStrategy = ExemplarStrategy.FIXED,
    seed: int = 0,
    curated: Optional[Sequence[Exemplar]] = None,
) -> list[Exemplar]:
    """Pick ``k`` exemplars.

    ``fixed`` returns the first ``k`` of the curated list (the two built-in
    examples unless ``curated`` is given). ``random_seeded`` draws without
    replacement from the train set; when ``k >= 2`` and the draw shows a single
    professionalism level, the last pick is swapped for the next candidate
    with a different level, if the train set has one.

    Raises:
        NotEnoughExamples: If ``k`` exceeds the available pool
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if k == 0:
        return []

    if strategy is ExemplarStrategy.FIXED:
        pool = list(curated if curated is not None else BUILTIN_EXEMPLARS)
        if k > len(pool):
            raise NotEnoughExamples(k, len(pool))
        chosen = pool[:k]
        if k >= 2 and len(_professionalism_levels(chosen)) < 2:
            warnings.warn(
                "Curated exemplars cover a single professionalism level",
                stacklevel=2,
            )
        return chosen

    if k > len(train_set):
        raise NotEnoughExamples(k, len(train_set))
    order = [int(i) for i in np.random.default_rng(seed).permutation(len(train_set))]
    picked = order[:k]
    if k >= 2:
        levels = {train_set[i].gold[CriterionId.PROFESSIONALISM].index for i in picked}
        if len(levels) == 1:
            only = next(iter(levels))
            replacement = next(
                (i for i in order[k:] if train_set[i].gold[CriterionId.PROFESSIONALISM].index != only),
                None,
            )
            if replacement is not None:
                picked[-1] = replacement
    return [exemplar_from_example(train_set[i]) for i in picked]


def read_exemplars(path: Path) -> list[Exemplar]:
    """Load a curated exemplar list: one ``{text, labels}`` record per line."""
    _, records = read_jsonl(path)
    return [Exemplar.from_record(r) for r in records]
