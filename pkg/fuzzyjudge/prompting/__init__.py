"""Few-shot prompt construction and completion parsing."""

from .exemplars import (
    BUILTIN_EXEMPLARS,
    ExemplarStrategy,
    NotEnoughExamples,
    read_exemplars,
    select_exemplars,
)
from .grammar import MissingCriterion, parse_response
from .runner import DEFAULT_RETRIES, ParseFailed, prompt_judge
from .template import Exemplar, PromptTemplate, TemplateFailure, render_prompt

__all__ = [
    "DEFAULT_RETRIES",
    "Exemplar",
    "ExemplarStrategy",
    "MissingCriterion",
    "NotEnoughExamples",
    "BUILTIN_EXEMPLARS",
    "ParseFailed",
    "PromptTemplate",
    "TemplateFailure",
    "parse_response",
    "prompt_judge",
    "read_exemplars",
    "render_prompt",
    "select_exemplars",
]
