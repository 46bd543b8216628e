"""Conversation-log ingestion and student utterance extraction.

Input is the spreadsheet export of the simulation's conversation table: one
row per conversation pair with the columns listed in ``CONVERSATION_COLUMNS``.
"""

import csv
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Protocol

from .errors import FuzzyJudgeError
from .utils.artifacts import read_jsonl, write_jsonl

CONVERSATION_ID = "Conversation ID"
CASE = "Case"
JAILBREAK_ID = "Jailbreak ID"
CONVERSATION_PAIR = "Conversation Pair"
USER_MESSAGE = "User Message"
ASSISTANT_MESSAGE = "Assistant Message"

CONVERSATION_COLUMNS: tuple[str, ...] = (
    CONVERSATION_ID,
    CASE,
    JAILBREAK_ID,
    CONVERSATION_PAIR,
    USER_MESSAGE,
    ASSISTANT_MESSAGE,
)

DEFAULT_BOOTSTRAP_PHRASES: tuple[str, ...] = ("please start the conversation",)

# Characters left dangling once a bootstrap phrase is cut off the front.
_LEADING_JUNK = " \t\r\n.,;:!-"


class MissingColumn(FuzzyJudgeError):
    """Raised when a required column is absent from the source."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Missing required column '{name}'")


class MalformedRow(FuzzyJudgeError):
    """Raised when a row violates the conversation schema."""

    def __init__(self, row_number: int, reason: str):
        self.row_number = row_number
        self.reason = reason
        super().__init__(f"Row {row_number}: {reason}")


@dataclass(frozen=True)
class ConversationRow:
    """One conversation pair as exported from the conversation table."""

    conversation_id: str
    case_id: str
    jailbreak_id: Optional[str]
    pair_index: int
    user_message: str
    assistant_message: str


@dataclass(frozen=True)
class Utterance:
    """A cleaned student message with its provenance."""

    utterance_id: str
    text: str
    case_id: str
    conversation_id: str = ""
    pair_index: int = 0

    def to_record(self) -> dict[str, Any]:
        return {
            "utterance_id": self.utterance_id,
            "text": self.text,
            "case_id": self.case_id,
            "conversation_id": self.conversation_id,
            "pair_index": self.pair_index,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Utterance":
        return cls(
            utterance_id=str(record["utterance_id"]),
            text=str(record["text"]),
            case_id=str(record.get("case_id", "")),
            conversation_id=str(record.get("conversation_id", "")),
            pair_index=int(record.get("pair_index", 0)),
        )


def make_utterance_id(conversation_id: str, pair_index: int) -> str:
    return f"{conversation_id}:{pair_index}"


def _resolve_columns(header: Iterable[str]) -> dict[str, str]:
    """Map canonical column names to the header spelling used by the source."""
    by_folded = {name.strip().casefold(): name for name in header if name is not None}
    resolved: dict[str, str] = {}
    for column in CONVERSATION_COLUMNS:
        actual = by_folded.get(column.casefold())
        if actual is None:
            raise MissingColumn(column)
        resolved[column] = actual
    return resolved


def _parse_pair_index(raw: Any, row_number: int) -> int:
    text = str(raw).strip() if raw is not None else ""
    try:
        value = int(float(text)) if re.fullmatch(r"\d+(\.0+)?", text) else int(text)
    except ValueError:
        raise MalformedRow(row_number, f"'{CONVERSATION_PAIR}' is not an integer: {raw!r}") from None
    if value < 1:
        raise MalformedRow(row_number, f"'{CONVERSATION_PAIR}' must be >= 1, got {value}")
    return value


def ingest_conversations(source: Iterable[Mapping[str, Any]]) -> list[ConversationRow]:
    """Convert tabular records into conversation rows, preserving order.

    Header matching is case-insensitive. Row numbers in errors are 1-based
    positions in the record stream.

    Raises:
        MissingColumn: If a record lacks one of the six columns
        MalformedRow: On empty conversation ids, bad pair numbers, or a pair
            number that does not increase within its conversation
    """
    rows: list[ConversationRow] = []
    last_pair: dict[str, int] = {}
    columns: Optional[dict[str, str]] = None

    for row_number, record in enumerate(source, start=1):
        if columns is None or any(name not in record for name in columns.values()):
            columns = _resolve_columns(record.keys())

        conversation_id = str(record[columns[CONVERSATION_ID]] or "").strip()
        if not conversation_id:
            raise MalformedRow(row_number, f"empty '{CONVERSATION_ID}'")

        pair_index = _parse_pair_index(record[columns[CONVERSATION_PAIR]], row_number)
        previous = last_pair.get(conversation_id)
        if previous is not None and pair_index <= previous:
            reason = "duplicate" if pair_index == previous else "non-increasing"
            raise MalformedRow(
                row_number,
                f"{reason} conversation pair {pair_index} in conversation '{conversation_id}' "
                f"(previous pair {previous})",
            )
        last_pair[conversation_id] = pair_index

        jailbreak = str(record[columns[JAILBREAK_ID]] or "").strip()
        rows.append(
            ConversationRow(
                conversation_id=conversation_id,
                case_id=str(record[columns[CASE]] or "").strip(),
                jailbreak_id=jailbreak or None,
                pair_index=pair_index,
                user_message=str(record[columns[USER_MESSAGE]] or ""),
                assistant_message=str(record[columns[ASSISTANT_MESSAGE]] or ""),
            )
        )

    return rows


def read_conversations_csv(path: Path) -> list[ConversationRow]:
    """Read a UTF-8 comma-separated conversation export.

    A file with a header but no data rows yields an empty list; the header is
    still checked for the required columns.
    """
    with path.open("r", encoding="utf-8-sig", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return []
        _resolve_columns(reader.fieldnames)
        return ingest_conversations(reader)


def clean_utterance(
    text: str,
    bootstrap_phrases: Sequence[str] = DEFAULT_BOOTSTRAP_PHRASES,
) -> Optional[str]:
    """Trim a raw user message and strip leading bootstrap phrases.

    Bootstrap phrases match case-insensitively at the start of the message and
    only on a word boundary.

    Returns:
        The cleaned text, or None when nothing is left (the row is dropped)
    """
    cleaned = text.strip()
    removed = True
    while removed and cleaned:
        removed = False
        for phrase in bootstrap_phrases:
            phrase = phrase.strip()
            if not phrase or len(cleaned) < len(phrase):
                continue
            if cleaned[: len(phrase)].casefold() != phrase.casefold():
                continue
            rest = cleaned[len(phrase) :]
            if rest and (rest[0].isalnum() or rest[0] == "_"):
                continue
            cleaned = rest.lstrip(_LEADING_JUNK)
            removed = True
    return cleaned or None


def extract_utterances(
    rows: Sequence[ConversationRow],
    bootstrap_phrases: Sequence[str] = DEFAULT_BOOTSTRAP_PHRASES,
) -> list[Utterance]:
    """Keep the cleaned student message of every row that survives cleaning.

    Assistant messages are not part of the modeling input.

    Raises:
        MalformedRow: If two rows share a (conversation id, pair) identifier
    """
    seen: set[str] = set()
    utterances: list[Utterance] = []
    for row_number, row in enumerate(rows, start=1):
        utterance_id = make_utterance_id(row.conversation_id, row.pair_index)
        if utterance_id in seen:
            raise MalformedRow(row_number, f"duplicate utterance id '{utterance_id}'")
        seen.add(utterance_id)

        text = clean_utterance(row.user_message, bootstrap_phrases)
        if text is None:
            continue
        utterances.append(
            Utterance(
                utterance_id=utterance_id,
                text=text,
                case_id=row.case_id,
                conversation_id=row.conversation_id,
                pair_index=row.pair_index,
            )
        )
    return utterances


def write_corpus(path: Path, utterances: Iterable[Utterance], meta: Mapping[str, Any]) -> int:
    return write_jsonl(path, (u.to_record() for u in utterances), meta)


def read_corpus(path: Path) -> list[Utterance]:
    _, records = read_jsonl(path)
    return [Utterance.from_record(r) for r in records]


class TextItem(Protocol):
    """Anything judgeable: an utterance id plus its text."""

    @property
    def utterance_id(self) -> str: ...

    @property
    def text(self) -> str: ...
