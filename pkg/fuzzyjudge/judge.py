"""Judging orchestration: classifier, prompt and hybrid paths, ensembles."""

import concurrent.futures
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Optional

from .annotation import MixedUtterances, modal_level
from .backend.contracts import BackendFailure, ClassifierBackend, ClassifierBackendRef, GeneratorBackend
from .corpus import TextItem
from .errors import FuzzyJudgeError
from .finetune.trainer import predict
from .judgment import CriterionJudgment, JudgmentEntry, JudgmentError, JudgmentResult, JudgmentSource
from .prompting.runner import DEFAULT_RETRIES, ParseFailed, prompt_judge
from .prompting.template import Exemplar, PromptTemplate
from .rubric import CRITERIA_ORDER, CriterionId, LevelIndex

DEFAULT_THRESHOLD = 0.7
DEFAULT_CONCURRENCY = 4


class InvalidPolicy(FuzzyJudgeError):
    """Raised for a confidence threshold outside [0, 1]."""


class MissingBackend(FuzzyJudgeError):
    """Raised when a judging mode needs a backend that is not configured."""

    def __init__(self, mode: JudgmentSource, what: str):
        self.mode = mode
        self.what = what
        super().__init__(f"Mode '{mode.value}' needs {what}")


class EmptyResultSet(FuzzyJudgeError):
    """Raised when an ensemble has no member results."""

    def __init__(self) -> None:
        super().__init__("No judgment results to aggregate")


@dataclass(frozen=True)
class HybridPolicy:
    """Classifier levels with confidence at or above the threshold are kept."""

    confidence_threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise InvalidPolicy(
                f"confidence_threshold must be in [0, 1], got {self.confidence_threshold}"
            )

    def needs_check(self, confidence: Optional[float]) -> bool:
        """Whether a classifier judgment must be cross-checked by the prompt path.

        A threshold of 1 sends every criterion to the prompt path, including
        saturated confidences of exactly 1.0.
        """
        if confidence is None or self.confidence_threshold >= 1.0:
            return True
        return confidence < self.confidence_threshold


@dataclass
class JudgingResources:
    """Everything a judging mode may need."""

    classifier: Optional[ClassifierBackend] = None
    checkpoint: Optional[ClassifierBackendRef] = None
    generator: Optional[GeneratorBackend] = None
    exemplars: Sequence[Exemplar] = ()
    template: Optional[PromptTemplate] = None
    retries: int = DEFAULT_RETRIES
    policy: HybridPolicy = field(default_factory=HybridPolicy)
    concurrency: int = DEFAULT_CONCURRENCY
    max_output_length: int = 128
    temperature: float = 0.0

    def require(self, mode: JudgmentSource) -> None:
        if mode in (JudgmentSource.SFT, JudgmentSource.HYBRID):
            if self.classifier is None or self.checkpoint is None:
                raise MissingBackend(mode, "a trained classifier checkpoint")
        if mode in (JudgmentSource.PROMPT, JudgmentSource.HYBRID) and self.generator is None:
            raise MissingBackend(mode, "a generation backend")

    def prompt(self, item: TextItem) -> JudgmentResult:
        assert self.generator is not None
        return prompt_judge(
            self.generator,
            self.exemplars,
            item,
            retries=self.retries,
            template=self.template,
            max_output_length=self.max_output_length,
            temperature=self.temperature,
        )

    def workers(self) -> int:
        single = self.generator is not None and self.generator.single_flight
        return 1 if single else max(1, self.concurrency)


def combine_hybrid(
    classifier_result: JudgmentResult,
    consult: Callable[[], JudgmentResult],
    policy: HybridPolicy,
) -> JudgmentResult:
    """Cross-check low-confidence classifier levels against one prompt judgment.

    The prompt path is consulted at most once. Where it agrees the classifier
    judgment stays; where it disagrees its level wins and the criterion is
    flagged. If the prompt path fails, the classifier levels stay and every
    criterion that needed checking is flagged.
    """
    unsure = [c for c in CRITERIA_ORDER if policy.needs_check(classifier_result.confidence(c))]
    judgments: dict[CriterionId, CriterionJudgment] = dict(classifier_result.judgments)
    flags: set[CriterionId] = set()
    calls = 0

    if unsure:
        try:
            prompt_result: Optional[JudgmentResult] = consult()
        except ParseFailed as exc:
            prompt_result, calls = None, exc.attempts
        except BackendFailure:
            prompt_result, calls = None, 1

        if prompt_result is None:
            flags.update(unsure)
        else:
            calls = prompt_result.prompt_calls
            for criterion in unsure:
                prompt_level = prompt_result.judgments[criterion].level
                if prompt_level != classifier_result.judgments[criterion].level:
                    judgments[criterion] = CriterionJudgment(prompt_level, None)
                    flags.add(criterion)

    return JudgmentResult(
        utterance_id=classifier_result.utterance_id,
        text=classifier_result.text,
        judgments=judgments,
        source=JudgmentSource.HYBRID,
        low_confidence_flags=frozenset(flags),
        prompt_calls=calls,
    )


def judge_hybrid(
    utterance: TextItem,
    classifier: ClassifierBackend,
    checkpoint: ClassifierBackendRef,
    generator: GeneratorBackend,
    exemplars: Sequence[Exemplar],
    policy: HybridPolicy = HybridPolicy(),
    template: Optional[PromptTemplate] = None,
    retries: int = DEFAULT_RETRIES,
) -> JudgmentResult:
    """Hybrid judgment of a single utterance.

    Classifier errors propagate; prompt-path failures fall back to the
    classifier levels with low-confidence flags.
    """
    classifier_result = predict(checkpoint, [utterance], classifier)[0]
    resources = JudgingResources(
        classifier=classifier,
        checkpoint=checkpoint,
        generator=generator,
        exemplars=exemplars,
        template=template,
        retries=retries,
        policy=policy,
    )
    return combine_hybrid(classifier_result, lambda: resources.prompt(utterance), policy)


def _fan_out(
    items: Sequence[TextItem],
    work: Callable[[int, TextItem], JudgmentEntry],
    workers: int,
) -> list[JudgmentEntry]:
    results: list[Optional[JudgmentEntry]] = [None] * len(items)

    def guarded(index: int, item: TextItem) -> JudgmentEntry:
        try:
            return work(index, item)
        except Exception as exc:
            return JudgmentError.from_exception(item.utterance_id, item.text, exc)

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(guarded, i, item): i for i, item in enumerate(items)}
        for future in concurrent.futures.as_completed(futures):
            results[futures[future]] = future.result()

    return [r for r in results if r is not None]


def _classifier_pass(
    items: Sequence[TextItem], resources: JudgingResources
) -> list[JudgmentEntry]:
    assert resources.classifier is not None and resources.checkpoint is not None
    try:
        return list(predict(resources.checkpoint, items, resources.classifier))
    except Exception as exc:
        return [JudgmentError.from_exception(i.utterance_id, i.text, exc) for i in items]


def batch_judge(
    utterances: Sequence[TextItem],
    mode: JudgmentSource,
    resources: JudgingResources,
) -> list[JudgmentEntry]:
    """Judge a batch in one mode, preserving input order.

    Per-utterance failures become ``JudgmentError`` entries; the batch always
    yields exactly one entry per input.

    Raises:
        MissingBackend: If the mode's backends are not configured
    """
    resources.require(mode)
    if not utterances:
        return []

    if mode is JudgmentSource.SFT:
        return _classifier_pass(utterances, resources)

    if mode is JudgmentSource.PROMPT:
        return _fan_out(utterances, lambda _i, item: resources.prompt(item), resources.workers())

    classifier_entries = _classifier_pass(utterances, resources)

    def hybrid(index: int, item: TextItem) -> JudgmentEntry:
        entry = classifier_entries[index]
        if isinstance(entry, JudgmentError):
            return entry
        return combine_hybrid(entry, lambda: resources.prompt(item), resources.policy)

    return _fan_out(utterances, hybrid, resources.workers())


def aggregate_ensemble(results: Sequence[JudgmentResult]) -> JudgmentResult:
    """Combine several judgments of one utterance by per-criterion vote.

    Uses the consensus vote rule (mode, most severe level on ties). The
    confidence is the mean of the available member confidences. Tied
    criteria are flagged, as are criteria where a member voting for the
    winning level was flagged.

    Raises:
        EmptyResultSet: If ``results`` is empty
        MixedUtterances: If results belong to different utterances
    """
    if not results:
        raise EmptyResultSet()
    ids = {r.utterance_id for r in results}
    if len(ids) > 1:
        raise MixedUtterances(ids)

    judgments: dict[CriterionId, CriterionJudgment] = {}
    flags: set[CriterionId] = set()
    for criterion in CRITERIA_ORDER:
        winner, tied = modal_level([r.level(criterion) for r in results])
        confidences = [c for r in results if (c := r.confidence(criterion)) is not None]
        mean = sum(confidences) / len(confidences) if confidences else None
        judgments[criterion] = CriterionJudgment(LevelIndex(criterion, winner), mean)
        voters_flagged = any(
            criterion in r.low_confidence_flags for r in results if r.level(criterion) == winner
        )
        if tied or voters_flagged:
            flags.add(criterion)

    sources = {r.source for r in results}
    first = results[0]
    return JudgmentResult(
        utterance_id=first.utterance_id,
        text=first.text,
        judgments=judgments,
        source=first.source if len(sources) == 1 else JudgmentSource.HYBRID,
        low_confidence_flags=frozenset(flags),
        prompt_calls=sum(r.prompt_calls for r in results),
    )


def batch_judge_ensemble(
    utterances: Sequence[TextItem],
    mode: JudgmentSource,
    passes: Sequence[JudgingResources],
) -> list[JudgmentEntry]:
    """Run one batch per resource set and aggregate per utterance.

    An utterance whose every pass failed keeps the first pass's error entry.
    """
    if not passes:
        raise EmptyResultSet()
    runs = [batch_judge(utterances, mode, resources) for resources in passes]
    combined: list[JudgmentEntry] = []
    for index in range(len(utterances)):
        entries = [run[index] for run in runs]
        ok = [e for e in entries if isinstance(e, JudgmentResult)]
        combined.append(aggregate_ensemble(ok) if ok else entries[0])
    return combined
