"""Per-judge annotations, consensus gold labels, agreement and dataset splits."""

import csv
import math
import re
import warnings
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple, Optional, TypeVar

import numpy as np
from sklearn.metrics import cohen_kappa_score

from .corpus import MalformedRow, MissingColumn, Utterance
from .errors import FuzzyJudgeError
from .rubric import CRITERIA_ORDER, CriterionId, LevelIndex, get_criterion, parse_level
from .utils.artifacts import read_jsonl, write_jsonl

DEFAULT_EXPECTED_JUDGES = 7

UTTERANCE_ID_COLUMN = "utterance_id"

T = TypeVar("T")


class EmptyRecordSet(FuzzyJudgeError):
    """Raised when consensus is requested over no annotations."""

    def __init__(self) -> None:
        super().__init__("No annotation records to merge")


class MixedUtterances(FuzzyJudgeError):
    """Raised when records for different utterances are merged together."""

    def __init__(self, utterance_ids: Iterable[str]):
        self.utterance_ids = sorted(set(utterance_ids))
        super().__init__(
            f"Records reference more than one utterance: {', '.join(self.utterance_ids)}"
        )


class DuplicateJudgeRecord(FuzzyJudgeError):
    """Raised when a judge labels the same utterance twice."""

    def __init__(self, judge_id: str, utterance_id: str):
        self.judge_id = judge_id
        self.utterance_id = utterance_id
        super().__init__(f"Judge '{judge_id}' has more than one record for '{utterance_id}'")


class InsufficientJudges(FuzzyJudgeError):
    """Raised when agreement needs at least two judges and has fewer."""

    def __init__(self, utterance_id: Optional[str], count: int):
        self.utterance_id = utterance_id
        self.count = count
        where = f" for '{utterance_id}'" if utterance_id else ""
        super().__init__(f"Agreement needs at least 2 judges{where}, found {count}")


class BadSpec(FuzzyJudgeError):
    """Raised for split specifications that cannot partition the data."""


@dataclass(frozen=True)
class JudgeAnnotation:
    """One judge's labeling of one utterance on all four criteria."""

    judge_id: str
    utterance_id: str
    labels: Mapping[CriterionId, LevelIndex]

    def __post_init__(self) -> None:
        missing = [c.value for c in CRITERIA_ORDER if c not in self.labels]
        if missing:
            raise MalformedRow(
                0,
                f"annotation by '{self.judge_id}' for '{self.utterance_id}' "
                f"lacks criteria: {', '.join(missing)}",
            )
        for criterion, level in self.labels.items():
            if level.criterion is not criterion:
                raise MalformedRow(
                    0, f"label {level} stored under criterion '{criterion.value}'"
                )

    @classmethod
    def from_indices(
        cls, judge_id: str, utterance_id: str, indices: Sequence[int]
    ) -> "JudgeAnnotation":
        """Build from four level indices in registry order."""
        return cls(
            judge_id=judge_id,
            utterance_id=utterance_id,
            labels={c: LevelIndex(c, i) for c, i in zip(CRITERIA_ORDER, indices, strict=True)},
        )


@dataclass(frozen=True)
class LabeledExample:
    """An utterance with its consensus labels."""

    utterance: Utterance
    gold: Mapping[CriterionId, LevelIndex]
    tie_flags: frozenset[CriterionId] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        missing = [c.value for c in CRITERIA_ORDER if c not in self.gold]
        if missing:
            raise MalformedRow(
                0, f"gold labels for '{self.utterance.utterance_id}' lack: {', '.join(missing)}"
            )

    @property
    def utterance_id(self) -> str:
        return self.utterance.utterance_id

    @property
    def text(self) -> str:
        return self.utterance.text

    def label_vector(self) -> tuple[int, ...]:
        """Gold level indices in registry order."""
        return tuple(self.gold[c].index for c in CRITERIA_ORDER)

    def to_record(self) -> dict[str, Any]:
        return self.utterance.to_record() | {
            "labels": list(self.label_vector()),
            "tie_flags": [c.value for c in CRITERIA_ORDER if c in self.tie_flags],
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "LabeledExample":
        utterance = Utterance.from_record(record)
        labels = list(record["labels"])
        return cls(
            utterance=utterance,
            gold={c: LevelIndex(c, int(i)) for c, i in zip(CRITERIA_ORDER, labels, strict=True)},
            tie_flags=frozenset(CriterionId.from_string(c) for c in record.get("tie_flags", [])),
        )


class SplitMode(Enum):
    FRACTIONS = "fractions"
    EXACT_COUNTS = "exact_counts"


@dataclass(frozen=True)
class SplitSpec:
    """How to partition labeled examples into train/validation/test.

    ``sizes`` holds fractions (summing to 1) or exact counts depending on
    ``mode``.
    """

    mode: SplitMode = SplitMode.FRACTIONS
    sizes: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 7

    def __post_init__(self) -> None:
        if len(self.sizes) != 3:
            raise BadSpec(f"Expected three split sizes, got {len(self.sizes)}")
        if self.mode is SplitMode.FRACTIONS:
            if any(not (s > 0) for s in self.sizes):
                raise BadSpec(f"Split fractions must be positive, got {self.sizes}")
            if not math.isclose(sum(self.sizes), 1.0, abs_tol=1e-6):
                raise BadSpec(f"Split fractions must sum to 1, got {sum(self.sizes):.6f}")
        else:
            if any(s < 0 or float(s) != int(s) for s in self.sizes):
                raise BadSpec(f"Split counts must be non-negative integers, got {self.sizes}")

    @classmethod
    def from_fractions(cls, train: float, val: float, test: float, seed: int = 7) -> "SplitSpec":
        return cls(SplitMode.FRACTIONS, (float(train), float(val), float(test)), seed)

    @classmethod
    def from_counts(cls, train: int, val: int, test: int, seed: int = 7) -> "SplitSpec":
        return cls(SplitMode.EXACT_COUNTS, (train, val, test), seed)

    def allocate(self, n: int) -> tuple[int, int, int]:
        """Return (train, val, test) sizes for ``n`` items.

        Fractions use floor allocation for validation and test; the remainder
        goes to train.

        Raises:
            BadSpec: If the spec cannot partition ``n`` items
        """
        if self.mode is SplitMode.EXACT_COUNTS:
            counts = tuple(int(s) for s in self.sizes)
            if sum(counts) != n:
                raise BadSpec(f"Split counts {counts} sum to {sum(counts)}, expected {n}")
            return counts[0], counts[1], counts[2]
        if n < 3:
            raise BadSpec(f"Fraction splits need at least 3 examples, got {n}")
        # Absorbs float error such as 0.29 * 100 == 28.999999999999996.
        n_val = math.floor(n * self.sizes[1] + 1e-9)
        n_test = math.floor(n * self.sizes[2] + 1e-9)
        return n - n_val - n_test, n_val, n_test

    def describe(self) -> dict[str, Any]:
        sizes: list[float] | list[int] = (
            [int(s) for s in self.sizes]
            if self.mode is SplitMode.EXACT_COUNTS
            else list(self.sizes)
        )
        return {"mode": self.mode.value, "sizes": sizes, "seed": self.seed}


class DatasetSplit(NamedTuple):
    train: list[Any]
    val: list[Any]
    test: list[Any]


def modal_level(votes: Sequence[int]) -> tuple[int, bool]:
    """The shared vote rule: most frequent level, lowest index among ties.

    Returns:
        Tuple of (winning level index, whether the mode was tied)
    """
    if not votes:
        raise ValueError("modal_level needs at least one vote")
    counts = Counter(votes)
    top = max(counts.values())
    tied = [level for level, count in counts.items() if count == top]
    return min(tied), len(tied) > 1


def merge_annotations(
    records: Sequence[JudgeAnnotation],
) -> tuple[dict[CriterionId, LevelIndex], frozenset[CriterionId]]:
    """Consensus labels for one utterance, decided per criterion.

    Raises:
        EmptyRecordSet: If ``records`` is empty
        MixedUtterances: If records reference different utterances
        DuplicateJudgeRecord: If one judge appears twice
    """
    if not records:
        raise EmptyRecordSet()
    utterance_ids = {r.utterance_id for r in records}
    if len(utterance_ids) > 1:
        raise MixedUtterances(utterance_ids)
    seen: set[str] = set()
    for record in records:
        if record.judge_id in seen:
            raise DuplicateJudgeRecord(record.judge_id, record.utterance_id)
        seen.add(record.judge_id)

    gold: dict[CriterionId, LevelIndex] = {}
    ties: set[CriterionId] = set()
    for criterion in CRITERIA_ORDER:
        winner, tied = modal_level([r.labels[criterion].index for r in records])
        gold[criterion] = LevelIndex(criterion, winner)
        if tied:
            ties.add(criterion)
    return gold, frozenset(ties)


def group_by_utterance(records: Iterable[JudgeAnnotation]) -> dict[str, list[JudgeAnnotation]]:
    grouped: dict[str, list[JudgeAnnotation]] = defaultdict(list)
    for record in records:
        grouped[record.utterance_id].append(record)
    return dict(grouped)


def agreement_stats(records: Iterable[JudgeAnnotation]) -> dict[CriterionId, float]:
    """Mean pairwise judge agreement per criterion.

    For each utterance, agreement is the share of judge pairs giving the same
    level; judges without a record for the utterance are left out of its pairs.

    Raises:
        InsufficientJudges: If there are no records or an utterance has fewer
            than two judges
    """
    grouped = group_by_utterance(records)
    if not grouped:
        raise InsufficientJudges(None, 0)

    totals = {c: 0.0 for c in CRITERIA_ORDER}
    for utterance_id, group in grouped.items():
        judges = {r.judge_id for r in group}
        if len(judges) != len(group):
            duplicate = next(j for j, n in Counter(r.judge_id for r in group).items() if n > 1)
            raise DuplicateJudgeRecord(duplicate, utterance_id)
        if len(group) < 2:
            raise InsufficientJudges(utterance_id, len(group))
        pairs = math.comb(len(group), 2)
        for criterion in CRITERIA_ORDER:
            counts = Counter(r.labels[criterion].index for r in group)
            agreeing = sum(math.comb(c, 2) for c in counts.values())
            totals[criterion] += agreeing / pairs
    return {c: totals[c] / len(grouped) for c in CRITERIA_ORDER}


def judge_consensus_kappa(
    records: Iterable[JudgeAnnotation],
    examples: Sequence[LabeledExample],
) -> dict[str, dict[CriterionId, float]]:
    """Cohen's kappa between each judge and the consensus, per criterion."""
    gold_by_id = {e.utterance_id: e for e in examples}
    by_judge: dict[str, list[JudgeAnnotation]] = defaultdict(list)
    for record in records:
        if record.utterance_id in gold_by_id:
            by_judge[record.judge_id].append(record)

    result: dict[str, dict[CriterionId, float]] = {}
    for judge_id in sorted(by_judge):
        judged = by_judge[judge_id]
        per_criterion: dict[CriterionId, float] = {}
        for criterion in CRITERIA_ORDER:
            judge_levels = [r.labels[criterion].index for r in judged]
            gold_levels = [gold_by_id[r.utterance_id].gold[criterion].index for r in judged]
            per_criterion[criterion] = _kappa(
                judge_levels, gold_levels, get_criterion(criterion).level_count
            )
        result[judge_id] = per_criterion
    return result


def _kappa(first: Sequence[int], second: Sequence[int], level_count: int) -> float:
    # Both raters constant on the same level: chance agreement is 1 and kappa undefined.
    if len(set(first) | set(second)) <= 1:
        return 1.0
    return float(cohen_kappa_score(first, second, labels=list(range(level_count))))


def split_dataset(examples: Sequence[T], spec: SplitSpec) -> DatasetSplit:
    """Seeded partition into train, validation and test.

    Examples are shuffled with the spec's seed, allocated train first, then
    each subset is returned in input order.

    Raises:
        BadSpec: If the spec cannot partition ``examples``
    """
    n = len(examples)
    n_train, n_val, _ = spec.allocate(n)
    order = np.random.default_rng(spec.seed).permutation(n)
    train_idx = sorted(int(i) for i in order[:n_train])
    val_idx = sorted(int(i) for i in order[n_train : n_train + n_val])
    test_idx = sorted(int(i) for i in order[n_train + n_val :])
    return DatasetSplit(
        train=[examples[i] for i in train_idx],
        val=[examples[i] for i in val_idx],
        test=[examples[i] for i in test_idx],
    )


def _header_key(name: str) -> str:
    return re.sub(r"[\s\-]+", "_", name.strip()).casefold()


def read_judge_annotations(path: Path, judge_id: Optional[str] = None) -> list[JudgeAnnotation]:
    """Read one judge's CSV export.

    Columns: ``utterance_id`` plus one column per criterion (id or display
    name) holding level names. Rows with a blank label mean the judge did not
    annotate that utterance and are skipped.

    Raises:
        MissingColumn: If a required column is absent
        MalformedRow: On a blank utterance id
        UnknownLabel: On a label outside the criterion's levels
    """
    judge = judge_id or path.stem
    with path.open("r", encoding="utf-8-sig", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return []
        columns: dict[str, str] = {}
        for name in reader.fieldnames:
            key = _header_key(name)
            if key == UTTERANCE_ID_COLUMN:
                columns[UTTERANCE_ID_COLUMN] = name
                continue
            try:
                columns[CriterionId.from_string(name).value] = name
            except FuzzyJudgeError:
                continue
        for required in (UTTERANCE_ID_COLUMN, *(c.value for c in CRITERIA_ORDER)):
            if required not in columns:
                raise MissingColumn(required)

        annotations: list[JudgeAnnotation] = []
        for row_number, row in enumerate(reader, start=1):
            utterance_id = (row.get(columns[UTTERANCE_ID_COLUMN]) or "").strip()
            if not utterance_id:
                raise MalformedRow(row_number, f"empty '{UTTERANCE_ID_COLUMN}' in {path.name}")
            raw = {c: (row.get(columns[c.value]) or "").strip() for c in CRITERIA_ORDER}
            if not all(raw.values()):
                continue
            annotations.append(
                JudgeAnnotation(
                    judge_id=judge,
                    utterance_id=utterance_id,
                    labels={c: parse_level(c, raw[c]) for c in CRITERIA_ORDER},
                )
            )
    return annotations


def build_gold(
    utterances: Sequence[Utterance],
    annotations: Iterable[JudgeAnnotation],
    expected_judges: Optional[int] = DEFAULT_EXPECTED_JUDGES,
) -> tuple[list[LabeledExample], list[str]]:
    """Merge annotations into labeled examples in corpus order.

    Returns:
        Tuple of (labeled examples, ids of utterances nobody annotated)
    """
    grouped = group_by_utterance(annotations)
    known = {u.utterance_id for u in utterances}
    unknown = sorted(set(grouped) - known)
    if unknown:
        warnings.warn(
            f"{len(unknown)} annotated utterance id(s) are not in the corpus, e.g. '{unknown[0]}'",
            stacklevel=2,
        )

    if expected_judges is not None and grouped:
        judges = {r.judge_id for group in grouped.values() for r in group}
        if len(judges) != expected_judges:
            warnings.warn(
                f"Found {len(judges)} judges, expected {expected_judges}",
                stacklevel=2,
            )

    examples: list[LabeledExample] = []
    unannotated: list[str] = []
    for utterance in utterances:
        group = grouped.get(utterance.utterance_id)
        if not group:
            unannotated.append(utterance.utterance_id)
            continue
        gold, ties = merge_annotations(group)
        examples.append(LabeledExample(utterance=utterance, gold=gold, tie_flags=ties))
    return examples, unannotated


def write_gold(path: Path, examples: Iterable[LabeledExample], meta: Mapping[str, Any]) -> int:
    return write_jsonl(path, (e.to_record() for e in examples), meta)


def read_gold(path: Path) -> list[LabeledExample]:
    _, records = read_jsonl(path)
    return [LabeledExample.from_record(r) for r in records]


def write_manifest(path: Path, examples: Iterable[LabeledExample], meta: Mapping[str, Any]) -> int:
    """Write one split's examples; same record schema as the gold dataset."""
    return write_gold(path, examples, meta)


def read_manifest(path: Path) -> list[LabeledExample]:
    return read_gold(path)
