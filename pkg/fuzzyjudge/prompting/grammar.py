"""Parsing model completions into per-criterion levels using pyparsing."""

import re

from pyparsing import (
    MatchFirst,
    Optional,
    ParseException,
    ParserElement,
    Regex,
    Suppress,
    rest_of_line,
)

from ..errors import FuzzyJudgeError
from ..rubric import CRITERIA_ORDER, CriterionId, LevelIndex, criteria_registry, parse_level


class MissingCriterion(FuzzyJudgeError):
    """Raised when a completion has no line for a criterion."""

    def __init__(self, criterion: CriterionId):
        self.criterion = criterion
        super().__init__(f"Completion has no '{criterion.value}' line")


_LEVEL_JUNK = "\"'`*_ \t"


class ResponseGrammar:
    """Grammar for one ``Criterion: Level`` line.

    Accepts Markdown bullets, numbering and bold/italic markers around the
    criterion name; criterion names match case-insensitively with any run of
    whitespace or underscores between words.
    """

    def __init__(self) -> None:
        names = []
        for criterion in criteria_registry():
            words = [re.escape(w) for w in criterion.display_name.split()]
            pattern = r"[\s_]+".join(words) + r"\b"
            name = Regex(pattern, flags=re.IGNORECASE)
            name.set_parse_action(lambda _s, _l, _t, cid=criterion.id: cid)
            names.append(name)

        prefix = Suppress(Regex(r"(?:[-*+•>#]+|\d+[.)])\s*"))
        emphasis = Suppress(Regex(r"[*_]{1,2}"))

        self.label_line: ParserElement = (
            Optional(prefix)
            + Optional(emphasis)
            + MatchFirst(names)("criterion")
            + Optional(emphasis)
            + Suppress(":")
            + rest_of_line("level")
        )

    def parse_line(self, line: str) -> tuple[CriterionId, str] | None:
        """Criterion and raw level text of a label line, or None."""
        try:
            result = self.label_line.parse_string(line.strip())
        except ParseException:
            return None
        return result["criterion"], clean_level_text(result["level"])


def clean_level_text(raw: str) -> str:
    value = raw.strip().strip(_LEVEL_JUNK)
    while value.endswith("."):
        value = value[:-1].rstrip(_LEVEL_JUNK)
    return value


_grammar = ResponseGrammar()


def scan_labels(completion: str) -> dict[CriterionId, str]:
    """First level text found for each criterion, by line."""
    found: dict[CriterionId, str] = {}
    for line in completion.replace("\r\n", "\n").replace("\r", "\n").split("\n"):
        parsed = _grammar.parse_line(line)
        if parsed is None:
            continue
        criterion, level = parsed
        found.setdefault(criterion, level)
    return found


def parse_response(completion: str) -> dict[CriterionId, LevelIndex]:
    """Extract the four labels from a completion.

    Prose before, between and after the label lines is ignored; the first
    line for each criterion wins.

    Raises:
        MissingCriterion: If a criterion has no label line
        UnknownLabel: If a level text matches none of the criterion's levels
    """
    found = scan_labels(completion)
    for criterion in CRITERIA_ORDER:
        if criterion not in found:
            raise MissingCriterion(criterion)
    return {c: parse_level(c, found[c]) for c in CRITERIA_ORDER}
