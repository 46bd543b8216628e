"""Evaluation against consensus labels, baselines and the summary report."""

import json
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from .annotation import LabeledExample, modal_level
from .errors import FuzzyJudgeError
from .finetune.trainer import EmptyDataset
from .judgment import JudgmentEntry, JudgmentResult, split_entries
from .rubric import CRITERIA_ORDER, CriterionId, get_criterion, level_name


class LengthMismatch(FuzzyJudgeError):
    """Raised when predictions and gold labels do not line up."""

    def __init__(self, predictions: int, gold: int, detail: str = ""):
        self.predictions = predictions
        self.gold = gold
        suffix = f": {detail}" if detail else ""
        super().__init__(f"{predictions} predictions for {gold} gold labels{suffix}")


class EmptyEvaluation(FuzzyJudgeError):
    """Raised when there is nothing to evaluate."""

    def __init__(self) -> None:
        super().__init__("Cannot evaluate an empty prediction set")


class IncompleteReport(FuzzyJudgeError):
    """Raised when a report lacks systems or criteria."""


class NoConfidences(FuzzyJudgeError):
    """Raised when no judgment carries a confidence value."""

    def __init__(self) -> None:
        super().__init__("No judgment has an available confidence")


class SystemName(Enum):
    """Evaluated systems, in report order (also the tie-break order)."""

    HYBRID = "hybrid"
    SFT = "sft"
    PROMPT = "prompt"
    MAJORITY = "majority"

    @property
    def display_name(self) -> str:
        return _SYSTEM_DISPLAY[self]

    @classmethod
    def from_string(cls, value: str) -> "SystemName":
        try:
            return cls(value.strip().lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"Invalid system: {value}. Valid systems: {valid}") from None


_SYSTEM_DISPLAY = {
    SystemName.HYBRID: "Hybrid",
    SystemName.SFT: "SFT",
    SystemName.PROMPT: "Prompt",
    SystemName.MAJORITY: "Majority class",
}

SYSTEM_ORDER: tuple[SystemName, ...] = tuple(SystemName)


class ReportFormat(Enum):
    TABLE_TEXT = "table_text"
    STRUCTURED = "structured"


@dataclass(frozen=True)
class CriterionMetrics:
    """Scores of one system on one criterion.

    Per-level tuples are indexed by level; they are empty for metrics restored
    from stored summary values only.
    """

    criterion: CriterionId
    accuracy: float
    weighted_precision: float
    weighted_f1: float
    weighted_recall: float = 0.0
    support: tuple[int, ...] = ()
    confusion: tuple[tuple[int, ...], ...] = ()
    precision: tuple[float, ...] = ()
    recall: tuple[float, ...] = ()
    f1: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for name in ("accuracy", "weighted_precision", "weighted_f1", "weighted_recall"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    @property
    def n(self) -> int:
        return sum(self.support)

    @property
    def per_level_accuracy(self) -> tuple[float, ...]:
        """Share of each gold level predicted correctly (per-level recall)."""
        return self.recall

    @classmethod
    def stored(
        cls,
        criterion: CriterionId,
        accuracy: float,
        weighted_precision: float,
        weighted_f1: float,
    ) -> "CriterionMetrics":
        return cls(criterion, accuracy, weighted_precision, weighted_f1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "criterion": self.criterion.value,
            "accuracy": self.accuracy,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "support": list(self.support),
            "confusion": [list(row) for row in self.confusion],
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
        }

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "CriterionMetrics":
        return cls(
            criterion=CriterionId.from_string(values["criterion"]),
            accuracy=float(values["accuracy"]),
            weighted_precision=float(values["weighted_precision"]),
            weighted_f1=float(values["weighted_f1"]),
            weighted_recall=float(values.get("weighted_recall", 0.0)),
            support=tuple(int(v) for v in values.get("support", [])),
            confusion=tuple(tuple(int(v) for v in row) for row in values.get("confusion", [])),
            precision=tuple(float(v) for v in values.get("precision", [])),
            recall=tuple(float(v) for v in values.get("recall", [])),
            f1=tuple(float(v) for v in values.get("f1", [])),
        )


def criterion_metrics(
    predictions: Sequence[int], gold: Sequence[int], criterion: CriterionId
) -> CriterionMetrics:
    """Accuracy, support-weighted precision/recall/F1 and the confusion matrix.

    Levels without gold support get zero weight; a per-level score with an
    empty denominator is 0.

    Raises:
        LengthMismatch: If the sequences differ in length
        EmptyEvaluation: If they are empty
        IndexOutOfRange: If a level is outside the criterion's range
    """
    if len(predictions) != len(gold):
        raise LengthMismatch(len(predictions), len(gold))
    if not gold:
        raise EmptyEvaluation()
    for value in (*predictions, *gold):
        level_name(criterion, value)

    labels = list(range(get_criterion(criterion).level_count))
    y_true = np.asarray(gold, dtype=np.int64)
    y_pred = np.asarray(predictions, dtype=np.int64)
    matrix = confusion_matrix(y_true, y_pred, labels=labels)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0
    )
    w_precision, w_recall, w_f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average="weighted", zero_division=0
    )
    return CriterionMetrics(
        criterion=criterion,
        accuracy=float(np.trace(matrix)) / len(gold),
        weighted_precision=float(w_precision),
        weighted_f1=float(w_f1),
        weighted_recall=float(w_recall),
        support=tuple(int(s) for s in support),
        confusion=tuple(tuple(int(v) for v in row) for row in matrix),
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        f1=tuple(float(v) for v in f1),
    )


def align_predictions(
    judgments: Sequence[JudgmentResult], gold: Sequence[LabeledExample]
) -> list[tuple[JudgmentResult, LabeledExample]]:
    """Pair judgments with gold examples by utterance id, in gold order.

    Raises:
        LengthMismatch: If the id sets differ or ids repeat
    """
    by_id = {j.utterance_id: j for j in judgments}
    if len(by_id) != len(judgments):
        raise LengthMismatch(len(judgments), len(gold), "duplicate utterance ids in predictions")
    gold_ids = {g.utterance_id for g in gold}
    if set(by_id) != gold_ids:
        missing = sorted(gold_ids - set(by_id))
        extra = sorted(set(by_id) - gold_ids)
        detail = f"missing {missing[:3]}" if missing else f"unexpected {extra[:3]}"
        raise LengthMismatch(len(judgments), len(gold), detail)
    return [(by_id[g.utterance_id], g) for g in gold]


def evaluate_judgments(
    judgments: Sequence[JudgmentResult], gold: Sequence[LabeledExample]
) -> dict[CriterionId, CriterionMetrics]:
    pairs = align_predictions(judgments, gold)
    return {
        c: criterion_metrics(
            [j.level(c) for j, _ in pairs], [g.gold[c].index for _, g in pairs], c
        )
        for c in CRITERIA_ORDER
    }


def majority_levels(train_gold: Sequence[LabeledExample]) -> dict[CriterionId, int]:
    """Most frequent train level per criterion, lowest index on ties."""
    if not train_gold:
        raise EmptyDataset("train")
    return {c: modal_level([e.gold[c].index for e in train_gold])[0] for c in CRITERIA_ORDER}


def majority_class_baseline(
    train_gold: Sequence[LabeledExample], test_gold: Sequence[LabeledExample]
) -> dict[CriterionId, CriterionMetrics]:
    """Predict each criterion's modal train level for every test item.

    Raises:
        EmptyDataset: If either set is empty
    """
    levels = majority_levels(train_gold)
    if not test_gold:
        raise EmptyDataset("test")
    return {
        c: criterion_metrics(
            [levels[c]] * len(test_gold), [e.gold[c].index for e in test_gold], c
        )
        for c in CRITERIA_ORDER
    }


@dataclass(frozen=True)
class ConfidenceSummary:
    count: int
    mean: Optional[float]
    minimum: Optional[float]
    maximum: Optional[float]
    share_above: Optional[float]
    threshold: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "mean": self.mean,
            "min": self.minimum,
            "max": self.maximum,
            "share_above": self.share_above,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "ConfidenceSummary":
        return cls(
            count=int(values["count"]),
            mean=values.get("mean"),
            minimum=values.get("min"),
            maximum=values.get("max"),
            share_above=values.get("share_above"),
            threshold=float(values["threshold"]),
        )


def confidence_summary(
    judgments: Sequence[JudgmentResult], threshold: float = 0.7
) -> dict[CriterionId, ConfidenceSummary]:
    """Statistics over the available confidences, per criterion.

    ``share_above`` is the share of available confidences at or above the
    threshold.

    Raises:
        NoConfidences: If no judgment has any available confidence
    """
    summaries: dict[CriterionId, ConfidenceSummary] = {}
    any_available = False
    for criterion in CRITERIA_ORDER:
        values = [c for j in judgments if (c := j.confidence(criterion)) is not None]
        if not values:
            summaries[criterion] = ConfidenceSummary(0, None, None, None, None, threshold)
            continue
        any_available = True
        summaries[criterion] = ConfidenceSummary(
            count=len(values),
            mean=math.fsum(values) / len(values),
            minimum=min(values),
            maximum=max(values),
            share_above=sum(1 for v in values if v >= threshold) / len(values),
            threshold=threshold,
        )
    if not any_available:
        raise NoConfidences()
    return summaries


@dataclass(frozen=True)
class SystemEvaluation:
    metrics: Mapping[CriterionId, CriterionMetrics]
    evaluated: int = 0
    errors: int = 0
    confidence: Optional[Mapping[CriterionId, ConfidenceSummary]] = None

    @property
    def scored(self) -> bool:
        """False when every judgment of the system failed."""
        return bool(self.metrics)


@dataclass(frozen=True)
class EvalReport:
    """Per-system, per-criterion scores plus provenance.

    Validated on construction so emitting never fails.
    """

    systems: Mapping[SystemName, SystemEvaluation]
    dataset_fingerprint: str
    split_seed: Optional[int] = None
    config: Mapping[str, Any] = field(default_factory=dict)
    test_size: int = 0

    def __post_init__(self) -> None:
        if not self.systems:
            raise IncompleteReport("Report has no evaluated systems")
        for system, evaluation in self.systems.items():
            if not evaluation.scored:
                continue
            missing = [c.value for c in CRITERIA_ORDER if c not in evaluation.metrics]
            if missing:
                raise IncompleteReport(
                    f"System '{system.value}' lacks criteria: {', '.join(missing)}"
                )
        if not self.scored_systems():
            raise IncompleteReport("Report has no scored systems")

    def ordered_systems(self) -> list[SystemName]:
        return [s for s in SYSTEM_ORDER if s in self.systems]

    def scored_systems(self) -> list[SystemName]:
        return [s for s in self.ordered_systems() if self.systems[s].scored]

    def best_system(self, criterion: CriterionId) -> SystemName:
        """Highest accuracy; ties go to higher weighted F1, then report order."""
        ordered = self.scored_systems()
        return max(
            ordered,
            key=lambda s: (
                self.systems[s].metrics[criterion].accuracy,
                self.systems[s].metrics[criterion].weighted_f1,
                -ordered.index(s),
            ),
        )


def build_report(
    judgment_sets: Mapping[SystemName, Sequence[JudgmentEntry]],
    test_gold: Sequence[LabeledExample],
    train_gold: Sequence[LabeledExample],
    dataset_fingerprint: str,
    split_seed: Optional[int] = None,
    config: Optional[Mapping[str, Any]] = None,
    threshold: float = 0.7,
) -> EvalReport:
    """Score each judged system and the majority-class baseline.

    Utterances whose judgment failed are left out of that system's scores and
    counted in ``errors``. A system with no successful judgment is kept
    unscored and a warning is issued.
    """
    if not test_gold:
        raise EmptyEvaluation()
    systems: dict[SystemName, SystemEvaluation] = {}
    for system, entries in judgment_sets.items():
        results, errors = split_entries(entries)
        if not results:
            warnings.warn(
                f"All {len(errors)} judgment(s) of system '{system.value}' failed; it is left unscored"
            )
            systems[system] = SystemEvaluation(metrics={}, errors=len(errors))
            continue
        judged = {r.utterance_id for r in results}
        subset = [g for g in test_gold if g.utterance_id in judged]
        try:
            confidence: Optional[dict[CriterionId, ConfidenceSummary]] = confidence_summary(
                results, threshold
            )
        except NoConfidences:
            confidence = None
        systems[system] = SystemEvaluation(
            metrics=evaluate_judgments(results, subset),
            evaluated=len(results),
            errors=len(errors),
            confidence=confidence,
        )
    systems[SystemName.MAJORITY] = SystemEvaluation(
        metrics=majority_class_baseline(train_gold, test_gold),
        evaluated=len(test_gold),
    )
    return EvalReport(
        systems=systems,
        dataset_fingerprint=dataset_fingerprint,
        split_seed=split_seed,
        config=dict(config or {}),
        test_size=len(test_gold),
    )


def report_to_dict(report: EvalReport) -> dict[str, Any]:
    return {
        "dataset_fingerprint": report.dataset_fingerprint,
        "split_seed": report.split_seed,
        "test_size": report.test_size,
        "config": dict(report.config),
        "systems": {
            s.value: {
                "evaluated": e.evaluated,
                "errors": e.errors,
                "metrics": {c.value: e.metrics[c].to_dict() for c in CRITERIA_ORDER if c in e.metrics},
                "confidence": (
                    None
                    if e.confidence is None
                    else {c.value: e.confidence[c].to_dict() for c in CRITERIA_ORDER}
                ),
            }
            for s, e in ((s, report.systems[s]) for s in report.ordered_systems())
        },
        "best": {c.value: report.best_system(c).value for c in CRITERIA_ORDER},
    }


def report_from_dict(values: Mapping[str, Any]) -> EvalReport:
    systems: dict[SystemName, SystemEvaluation] = {}
    for name, entry in values.get("systems", {}).items():
        confidence = entry.get("confidence")
        systems[SystemName.from_string(name)] = SystemEvaluation(
            metrics={
                CriterionId.from_string(c): CriterionMetrics.from_dict(m)
                for c, m in entry["metrics"].items()
            },
            evaluated=int(entry.get("evaluated", 0)),
            errors=int(entry.get("errors", 0)),
            confidence=(
                None
                if confidence is None
                else {CriterionId.from_string(c): ConfidenceSummary.from_dict(v) for c, v in confidence.items()}
            ),
        )
    return EvalReport(
        systems=systems,
        dataset_fingerprint=str(values.get("dataset_fingerprint", "")),
        split_seed=values.get("split_seed"),
        config=dict(values.get("config", {})),
        test_size=int(values.get("test_size", 0)),
    )


SUMMARY_HEADER = "| Criterion | Accuracy | Weighted avg | Weighted F1 Score | Best Model |"


def _num(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def summary_rows(report: EvalReport) -> list[tuple[str, str, str, str, str]]:
    """One row per criterion: the best system's scores and its name."""
    rows = []
    for criterion in CRITERIA_ORDER:
        best = report.best_system(criterion)
        metrics = report.systems[best].metrics[criterion]
        rows.append(
            (
                get_criterion(criterion).display_name,
                _num(metrics.accuracy),
                _num(metrics.weighted_precision),
                _num(metrics.weighted_f1),
                best.display_name,
            )
        )
    return rows


def _table_text(report: EvalReport) -> str:
    lines = ["# Evaluation report", ""]
    seed = "n/a" if report.split_seed is None else str(report.split_seed)
    lines.append(
        f"Dataset `{report.dataset_fingerprint}`, split seed {seed}, "
        f"{report.test_size} test utterances."
    )
    lines += ["", "## Summary", "", SUMMARY_HEADER, "|---|---|---|---|---|"]
    lines += [f"| {' | '.join(row)} |" for row in summary_rows(report)]

    for system in report.ordered_systems():
        evaluation = report.systems[system]
        lines += ["", f"## {system.display_name}", ""]
        if not evaluation.scored:
            lines.append(f"All {evaluation.errors} judgment(s) failed; no scores.")
            continue
        if evaluation.errors:
            lines += [
                f"{evaluation.evaluated} judged, {evaluation.errors} failed (excluded from scores).",
                "",
            ]
        lines += [
            "| Criterion | Accuracy | Weighted avg | Weighted recall | Weighted F1 Score |",
            "|---|---|---|---|---|",
        ]
        for criterion in CRITERIA_ORDER:
            m = evaluation.metrics[criterion]
            lines.append(
                f"| {get_criterion(criterion).display_name} | {_num(m.accuracy)} | "
                f"{_num(m.weighted_precision)} | {_num(m.weighted_recall)} | {_num(m.weighted_f1)} |"
            )

        level_rows = []
        for criterion in CRITERIA_ORDER:
            m = evaluation.metrics[criterion]
            spec = get_criterion(criterion)
            for index, support in enumerate(m.support):
                level_rows.append(
                    f"| {spec.display_name} | {spec.display_level(index)} | {support} | "
                    f"{_num(m.recall[index])} | {_num(m.precision[index])} | {_num(m.f1[index])} |"
                )
        if level_rows:
            lines += [
                "",
                "| Criterion | Level | Support | Accuracy | Precision | F1 |",
                "|---|---|---|---|---|---|",
                *level_rows,
            ]

    confidence_rows = []
    for system in report.ordered_systems():
        summaries = report.systems[system].confidence
        if summaries is None:
            continue
        for criterion in CRITERIA_ORDER:
            s = summaries[criterion]
            confidence_rows.append(
                f"| {system.display_name} | {get_criterion(criterion).display_name} | {s.count} | "
                f"{_num(s.mean)} | {_num(s.minimum)} | {_num(s.maximum)} | {_num(s.share_above)} |"
            )
    if confidence_rows:
        threshold = next(
            iter(next(e.confidence for e in report.systems.values() if e.confidence).values())
        ).threshold
        lines += [
            "",
            "## Confidence",
            "",
            f"| System | Criterion | Count | Mean | Min | Max | Share >= {threshold:g} |",
            "|---|---|---|---|---|---|---|",
            *confidence_rows,
        ]

    lines += [
        "",
        "## Notes",
        "",
        "- \"Weighted avg\" is precision averaged with weights proportional to gold support.",
        "- A per-level precision, recall or F1 with an empty denominator is reported as 0.",
        "- Per-level accuracy is the share of each gold level predicted correctly.",
        "",
    ]
    return "\n".join(lines)


def emit_report(report: EvalReport, format: ReportFormat = ReportFormat.TABLE_TEXT) -> str:
    """Render a report as Markdown tables or as structured JSON."""
    if format is ReportFormat.STRUCTURED:
        return json.dumps(report_to_dict(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    return _table_text(report)
