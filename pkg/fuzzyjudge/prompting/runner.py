"""Prompt-path judging: render, complete, parse, retry."""

from collections.abc import Sequence
from typing import Optional

from ..backend.contracts import GenerationRequest, GeneratorBackend, generate
from ..corpus import TextItem
from ..errors import FuzzyJudgeError
from ..judgment import CriterionJudgment, JudgmentResult, JudgmentSource
from ..rubric import UnknownLabel
from .grammar import MissingCriterion, parse_response
from .template import Exemplar, PromptTemplate, render_prompt

DEFAULT_RETRIES = 3


class ParseFailed(FuzzyJudgeError):
    """Raised when no completion could be parsed within the attempt budget."""

    def __init__(self, utterance_id: str, attempts: int, last_error: Optional[Exception]):
        self.utterance_id = utterance_id
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(
            f"Could not parse a judgment for '{utterance_id}' after {attempts} attempt(s): {last_error}"
        )


def prompt_judge(
    generator: GeneratorBackend,
    exemplars: Sequence[Exemplar],
    target: TextItem,
    retries: int = DEFAULT_RETRIES,
    template: Optional[PromptTemplate] = None,
    max_output_length: int = 128,
    temperature: float = 0.0,
) -> JudgmentResult:
    """Judge one utterance with a generator.

    Each failed parse triggers a fresh completion, up to ``retries`` calls in
    total. Confidence is unavailable on this path.

    Raises:
        ParseFailed: If every completion failed to parse
        BackendFailure: If the generator fails (not retried here)
    """
    request = GenerationRequest(
        prompt=render_prompt(exemplars, target.text, template),
        max_output_length=max_output_length,
        temperature=temperature,
    )
    attempts = max(1, retries)
    last_error: Optional[Exception] = None
    for call in range(1, attempts + 1):
        completion = generate(generator, request)
        try:
            labels = parse_response(completion)
        except (MissingCriterion, UnknownLabel) as exc:
            last_error = exc
            continue
        return JudgmentResult(
            utterance_id=target.utterance_id,
            text=target.text,
            judgments={c: CriterionJudgment(level, None) for c, level in labels.items()},
            source=JudgmentSource.PROMPT,
            prompt_calls=call,
        )
    raise ParseFailed(target.utterance_id, attempts, last_error)
