"""Multi-task cross-entropy: the unweighted sum of the four head losses."""

import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from ..errors import FuzzyJudgeError
from ..rubric import CRITERIA_ORDER, CriterionId, LevelIndex, get_criterion

EPSILON = 1e-12

GoldLabels = Mapping[CriterionId, LevelIndex] | Sequence[int]


class InvalidDistribution(FuzzyJudgeError):
    """Raised when a head output is not a probability vector over its levels."""

    def __init__(self, criterion: CriterionId, reason: str):
        self.criterion = criterion
        self.reason = reason
        super().__init__(f"Invalid distribution for {criterion.value}: {reason}")


class DegenerateDistribution(FuzzyJudgeError):
    """Raised in strict mode when a head gives the gold level zero probability."""

    def __init__(self, criteria: Sequence[CriterionId]):
        self.criteria = tuple(criteria)
        names = ", ".join(c.value for c in self.criteria)
        super().__init__(f"Gold level has zero probability on: {names}")


class DegenerateDistributionWarning(UserWarning):
    """Emitted when a zero gold probability was clamped to the epsilon."""


@dataclass(frozen=True)
class LossBreakdown:
    terms: dict[CriterionId, float]
    degenerate: frozenset[CriterionId]

    @property
    def total(self) -> float:
        return math.fsum(self.terms[c] for c in CRITERIA_ORDER)


def _gold_index(gold: GoldLabels, position: int, criterion: CriterionId) -> int:
    if isinstance(gold, Mapping):
        return gold[criterion].index
    return int(gold[position])


def _check_distribution(criterion: CriterionId, vector: Sequence[float]) -> None:
    width = get_criterion(criterion).level_count
    if len(vector) != width:
        raise InvalidDistribution(criterion, f"{len(vector)} entries, expected {width}")
    if any(not math.isfinite(p) or p < 0 for p in vector):
        raise InvalidDistribution(criterion, "negative or non-finite entry")
    total = math.fsum(vector)
    if abs(total - 1.0) > 1e-6:
        raise InvalidDistribution(criterion, f"sums to {total:.8f}")


def loss_breakdown(
    distributions: Mapping[CriterionId, Sequence[float]],
    gold: GoldLabels,
    strict: bool = False,
) -> LossBreakdown:
    """Per-criterion cross-entropy terms for one example.

    Raises:
        InvalidDistribution: If a head output is malformed
        DegenerateDistribution: In strict mode, if a gold level has
            probability below the epsilon
    """
    terms: dict[CriterionId, float] = {}
    degenerate: list[CriterionId] = []
    for position, criterion in enumerate(CRITERIA_ORDER):
        vector = distributions[criterion]
        _check_distribution(criterion, vector)
        p_gold = float(vector[_gold_index(gold, position, criterion)])
        if p_gold < EPSILON:
            degenerate.append(criterion)
            p_gold = EPSILON
        terms[criterion] = -math.log(p_gold)

    if degenerate:
        if strict:
            raise DegenerateDistribution(degenerate)
        warnings.warn(
            f"Clamped zero gold probability to {EPSILON} on: "
            + ", ".join(c.value for c in degenerate),
            DegenerateDistributionWarning,
            stacklevel=2,
        )
    return LossBreakdown(terms=terms, degenerate=frozenset(degenerate))


def multitask_loss(
    distributions: Mapping[CriterionId, Sequence[float]],
    gold: GoldLabels,
    strict: bool = False,
) -> float:
    """Sum over the four criteria of -log p(gold level)."""
    return loss_breakdown(distributions, gold, strict=strict).total


def head_cross_entropy(
    probabilities: npt.NDArray[np.float64], gold: npt.NDArray[np.int64]
) -> npt.NDArray[np.float64]:
    """Row-wise clamped cross-entropy for one head over a batch."""
    picked = probabilities[np.arange(len(gold)), gold]
    return -np.log(np.clip(picked, EPSILON, None))
