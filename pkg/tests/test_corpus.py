from pathlib import Path

import pytest

from fuzzyjudge.corpus import (
    ASSISTANT_MESSAGE,
    CASE,
    CONVERSATION_ID,
    CONVERSATION_PAIR,
    JAILBREAK_ID,
    USER_MESSAGE,
    MalformedRow,
    MissingColumn,
    clean_utterance,
    extract_utterances,
    ingest_conversations,
    read_conversations_csv,
    read_corpus,
    write_corpus,
)


def make_record(conversation: str, pair: object, user: str, jailbreak: str = "") -> dict[str, object]:
    return {
        CONVERSATION_ID: conversation,
        CASE: "case-7",
        JAILBREAK_ID: jailbreak,
        CONVERSATION_PAIR: pair,
        USER_MESSAGE: user,
        ASSISTANT_MESSAGE: "Hello doctor.",
    }


def test_ingest_preserves_order_and_fields():
    rows = ingest_conversations(
        [
            make_record("c1", 1, "Please start the conversation"),
            make_record("c1", 2, "What brings you in today?", jailbreak="jb-3"),
            make_record("c2", "1", "Hello"),
        ]
    )
    assert [(r.conversation_id, r.pair_index) for r in rows] == [("c1", 1), ("c1", 2), ("c2", 1)]
    assert rows[1].jailbreak_id == "jb-3"
    assert rows[0].jailbreak_id is None
    assert rows[2].case_id == "case-7"


def test_header_matching_is_case_insensitive():
    record = {key.upper(): value for key, value in make_record("c1", 1, "Hi").items()}
    rows = ingest_conversations([record])
    assert rows[0].user_message == "Hi"


def test_missing_column():
    record = make_record("c1", 1, "Hi")
    del record[JAILBREAK_ID]
    with pytest.raises(MissingColumn) as exc_info:
        ingest_conversations([record])
    assert "Jailbreak ID" in str(exc_info.value)


@pytest.mark.parametrize("pair", ["abc", "0", "-2", ""])
def test_bad_pair_number(pair: str):
    with pytest.raises(MalformedRow) as exc_info:
        ingest_conversations([make_record("c1", pair, "Hi")])
    assert exc_info.value.row_number == 1


def test_pair_number_accepts_float_text():
    rows = ingest_conversations([make_record("c1", "3.0", "Hi")])
    assert rows[0].pair_index == 3


def test_empty_conversation_id():
    with pytest.raises(MalformedRow):
        ingest_conversations([make_record("  ", 1, "Hi")])


@pytest.mark.parametrize("second_pair, reason", [(2, "duplicate"), (1, "non-increasing")])
def test_pairs_must_increase_within_conversation(second_pair: int, reason: str):
    with pytest.raises(MalformedRow) as exc_info:
        ingest_conversations([make_record("c1", 2, "a"), make_record("c1", second_pair, "b")])
    assert exc_info.value.row_number == 2
    assert reason in str(exc_info.value)


def test_pairs_are_tracked_per_conversation():
    rows = ingest_conversations([make_record("c1", 2, "a"), make_record("c2", 1, "b")])
    assert len(rows) == 2


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("  What brings you in?  ", "What brings you in?"),
        ("Please start the conversation", None),
        ("please START the conversation. How are you feeling?", "How are you feeling?"),
        ("Please start the conversation: Hi there", "Hi there"),
        ("Please start the conversationalist", "Please start the conversationalist"),
        ("   ", None),
        ("", None),
    ],
)
def test_clean_utterance(raw: str, expected: str | None):
    assert clean_utterance(raw) == expected


def test_clean_utterance_with_custom_phrases():
    assert clean_utterance("Begin. Hello", ("begin",)) == "Hello"
    assert clean_utterance("Begin begin Hello", ("begin",)) == "Hello"
    assert clean_utterance("Begin. Hello", ()) == "Begin. Hello"


def test_extract_utterances_drops_empty_and_builds_ids():
    rows = ingest_conversations(
        [
            make_record("c1", 1, "Please start the conversation"),
            make_record("c1", 2, "Do you have any allergies?"),
            make_record("c1", 3, "   "),
        ]
    )
    utterances = extract_utterances(rows)
    assert [u.utterance_id for u in utterances] == ["c1:2"]
    assert utterances[0].text == "Do you have any allergies?"
    assert utterances[0].conversation_id == "c1"
    assert utterances[0].pair_index == 2


def test_corpus_file_round_trip(tmp_path: Path):
    rows = ingest_conversations([make_record("c1", 2, "Any fever?")])
    utterances = extract_utterances(rows)
    path = tmp_path / "corpus.jsonl"
    assert write_corpus(path, utterances, {"artifact": "corpus"}) == 1
    assert read_corpus(path) == utterances


def test_read_csv_header_only(tmp_path: Path):
    path = tmp_path / "export.csv"
    path.write_text(",".join([CONVERSATION_ID, CASE, JAILBREAK_ID, CONVERSATION_PAIR, USER_MESSAGE, ASSISTANT_MESSAGE]) + "\n")
    assert read_conversations_csv(path) == []


def test_read_csv_header_missing_column(tmp_path: Path):
    path = tmp_path / "export.csv"
    path.write_text("Conversation ID,Case\n")
    with pytest.raises(MissingColumn):
        read_conversations_csv(path)


def test_fixture_export(fixtures_dir: Path):
    rows = read_conversations_csv(fixtures_dir / "project" / "data" / "conversations.csv")
    utterances = extract_utterances(rows)
    assert len(rows) == 50
    assert len(utterances) == 40
    assert all(u.pair_index > 1 for u in utterances)
    assert not any(u.text.lower().startswith("please start the conversation") for u in utterances)
