import itertools
import random
import warnings
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzyjudge.annotation import (
    BadSpec,
    DuplicateJudgeRecord,
    EmptyRecordSet,
    InsufficientJudges,
    JudgeAnnotation,
    MixedUtterances,
    SplitMode,
    SplitSpec,
    agreement_stats,
    build_gold,
    judge_consensus_kappa,
    merge_annotations,
    modal_level,
    read_gold,
    read_judge_annotations,
    read_manifest,
    split_dataset,
    write_gold,
    write_manifest,
)
from fuzzyjudge.corpus import MalformedRow, MissingColumn
from fuzzyjudge.rubric import CRITERIA_ORDER, CriterionId, UnknownLabel, level_counts
from fuzzyjudge.utils.artifacts import read_jsonl
from tests.conftest import make_annotation, make_example, make_utterance


def vote_oracle(votes: tuple[int, ...]) -> tuple[int, bool]:
    """Plain counting: highest count wins, lowest level among equals."""
    counts = [votes.count(level) for level in range(max(votes) + 1)]
    best = max(counts)
    winners = [level for level, count in enumerate(counts) if count == best]
    return winners[0], len(winners) > 1


def annotations_for(votes_by_criterion: dict[CriterionId, tuple[int, ...]]) -> list[JudgeAnnotation]:
    judges = len(next(iter(votes_by_criterion.values())))
    return [
        make_annotation(f"judge_{j}", "u1", [votes_by_criterion[c][j] for c in CRITERIA_ORDER])
        for j in range(judges)
    ]


def test_consensus_matches_exhaustive_vote_counting_for_professionalism():
    fixed = {c: (0,) * 7 for c in CRITERIA_ORDER}
    for votes in itertools.product(range(3), repeat=7):
        gold, ties = merge_annotations(annotations_for({**fixed, CriterionId.PROFESSIONALISM: votes}))
        expected, tied = vote_oracle(votes)
        assert gold[CriterionId.PROFESSIONALISM].index == expected, votes
        assert (CriterionId.PROFESSIONALISM in ties) == tied, votes


@pytest.mark.parametrize("criterion", CRITERIA_ORDER[1:])
def test_consensus_matches_vote_counting_on_random_vectors(criterion: CriterionId):
    rng = random.Random(criterion.value)
    levels = level_counts()[criterion]
    fixed = {c: (0,) * 7 for c in CRITERIA_ORDER}
    for _ in range(1000):
        votes = tuple(rng.randrange(levels) for _ in range(7))
        gold, ties = merge_annotations(annotations_for({**fixed, criterion: votes}))
        expected, tied = vote_oracle(votes)
        assert gold[criterion].index == expected
        assert (criterion in ties) == tied


def test_consensus_is_decided_per_criterion():
    gold, ties = merge_annotations(
        [
            make_annotation("a", "u1", [2, 0, 4, 3]),
            make_annotation("b", "u1", [2, 1, 4, 0]),
            make_annotation("c", "u1", [1, 1, 3, 0]),
        ]
    )
    assert [gold[c].index for c in CRITERIA_ORDER] == [2, 1, 4, 0]
    assert ties == frozenset()


def test_single_judge_is_its_own_consensus():
    gold, ties = merge_annotations([make_annotation("a", "u1", [1, 2, 3, 1])])
    assert [gold[c].index for c in CRITERIA_ORDER] == [1, 2, 3, 1]
    assert not ties


def test_tie_breaks_to_lowest_level_and_is_flagged():
    gold, ties = merge_annotations(
        [make_annotation("a", "u1", [2, 2, 4, 3]), make_annotation("b", "u1", [0, 2, 1, 3])]
    )
    assert gold[CriterionId.PROFESSIONALISM].index == 0
    assert gold[CriterionId.ETHICAL_BEHAVIOR].index == 1
    assert ties == frozenset({CriterionId.PROFESSIONALISM, CriterionId.ETHICAL_BEHAVIOR})


def test_merge_errors():
    with pytest.raises(EmptyRecordSet):
        merge_annotations([])
    with pytest.raises(MixedUtterances):
        merge_annotations([make_annotation("a", "u1", [0, 0, 0, 0]), make_annotation("b", "u2", [0, 0, 0, 0])])
    with pytest.raises(DuplicateJudgeRecord):
        merge_annotations([make_annotation("a", "u1", [0, 0, 0, 0]), make_annotation("a", "u1", [1, 0, 0, 0])])


def test_modal_level_requires_votes():
    with pytest.raises(ValueError):
        modal_level([])
    assert modal_level([3, 1, 3, 1]) == (1, True)
    assert modal_level([2]) == (2, False)


def test_annotation_requires_all_criteria():
    full = make_annotation("a", "u1", [0, 0, 0, 0])
    partial = dict(full.labels)
    del partial[CriterionId.ETHICAL_BEHAVIOR]
    with pytest.raises(MalformedRow):
        JudgeAnnotation("a", "u1", partial)


def test_agreement_stats():
    stats = agreement_stats(
        [
            make_annotation("a", "u1", [2, 2, 4, 3]),
            make_annotation("b", "u1", [2, 1, 4, 3]),
            make_annotation("c", "u1", [2, 0, 3, 3]),
            make_annotation("a", "u2", [0, 0, 0, 0]),
            make_annotation("b", "u2", [1, 0, 0, 0]),
        ]
    )
    assert stats[CriterionId.PROFESSIONALISM] == pytest.approx((1.0 + 0.0) / 2)
    assert stats[CriterionId.MEDICAL_RELEVANCE] == pytest.approx((0.0 + 1.0) / 2)
    assert stats[CriterionId.ETHICAL_BEHAVIOR] == pytest.approx((1 / 3 + 1.0) / 2)
    assert stats[CriterionId.CONTEXTUAL_DISTRACTION] == pytest.approx(1.0)


def test_agreement_needs_two_judges():
    with pytest.raises(InsufficientJudges):
        agreement_stats([])
    with pytest.raises(InsufficientJudges) as exc_info:
        agreement_stats([make_annotation("a", "u1", [0, 0, 0, 0])])
    assert exc_info.value.utterance_id == "u1"


def test_judge_consensus_kappa_is_one_for_a_judge_matching_consensus():
    records = [
        make_annotation("a", "u1", [2, 2, 4, 3]),
        make_annotation("a", "u2", [0, 1, 2, 0]),
        make_annotation("b", "u1", [2, 2, 4, 3]),
        make_annotation("b", "u2", [0, 1, 2, 0]),
    ]
    examples = [make_example("u1", [2, 2, 4, 3]), make_example("u2", [0, 1, 2, 0])]
    kappa = judge_consensus_kappa(records, examples)
    assert sorted(kappa) == ["a", "b"]
    assert all(value == pytest.approx(1.0) for value in kappa["a"].values())


def write_annotation_csv(path: Path, rows: list[str]) -> Path:
    header = "utterance_id,Professionalism,Medical Relevance,Ethical Behavior,Contextual Distraction"
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


def test_read_judge_annotations(tmp_path: Path):
    path = write_annotation_csv(
        tmp_path / "judge_3.csv",
        [
            "c1:2,Appropriate,Relevant,Safe,Not distracting",
            "c1:3,1. Unprofessional,irrelevant,Mostly safe,Questionable",
            "c1:4,,,,",
        ],
    )
    records = read_judge_annotations(path)
    assert [r.utterance_id for r in records] == ["c1:2", "c1:3"]
    assert records[0].judge_id == "judge_3"
    assert [records[1].labels[c].index for c in CRITERIA_ORDER] == [0, 0, 3, 2]


def test_read_judge_annotations_errors(tmp_path: Path):
    with pytest.raises(UnknownLabel):
        read_judge_annotations(write_annotation_csv(tmp_path / "a.csv", ["c1:2,Great,Relevant,Safe,Not distracting"]))
    with pytest.raises(MalformedRow):
        read_judge_annotations(write_annotation_csv(tmp_path / "b.csv", [",Appropriate,Relevant,Safe,Not distracting"]))
    missing = tmp_path / "c.csv"
    missing.write_text("utterance_id,Professionalism\nc1:2,Appropriate\n")
    with pytest.raises(MissingColumn):
        read_judge_annotations(missing)


def test_build_gold_keeps_corpus_order_and_reports_gaps():
    utterances = [make_utterance("u1"), make_utterance("u2"), make_utterance("u3")]
    annotations = [
        make_annotation("a", "u3", [0, 0, 0, 0]),
        make_annotation("a", "u1", [2, 2, 4, 3]),
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        examples, unannotated = build_gold(utterances, annotations, expected_judges=None)
    assert [e.utterance_id for e in examples] == ["u1", "u3"]
    assert unannotated == ["u2"]


def test_build_gold_warns_on_judge_count_and_unknown_ids():
    annotations = [make_annotation("a", "u1", [0, 0, 0, 0]), make_annotation("a", "zz", [0, 0, 0, 0])]
    with pytest.warns(UserWarning) as record:
        build_gold([make_utterance("u1")], annotations, expected_judges=7)
    messages = [str(w.message) for w in record]
    assert any("expected 7" in m for m in messages)
    assert any("not in the corpus" in m for m in messages)


def test_gold_file_round_trip(tmp_path: Path):
    example = make_example("u1", [1, 2, 3, 0])
    path = tmp_path / "gold.jsonl"
    write_gold(path, [example], {"artifact": "gold"})
    assert [e.label_vector() for e in read_gold(path)] == [(1, 2, 3, 0)]


def test_split_records_keep_conversation_provenance(tmp_path: Path):
    base = make_example("c9:4", [2, 2, 4, 3])
    example = replace(base, utterance=replace(base.utterance, conversation_id="c9", pair_index=4))
    path = tmp_path / "test.jsonl"
    write_manifest(path, [example], {"artifact": "split:test"})

    _, records = read_jsonl(path)
    assert records[0]["conversation_id"] == "c9"
    assert records[0]["pair_index"] == 4
    restored = read_manifest(path)[0]
    assert restored.utterance == example.utterance
    assert restored.label_vector() == (2, 2, 4, 3)


def test_split_fixture_with_exact_counts():
    items = list(range(2303))
    spec = SplitSpec.from_counts(1611, 231, 461, seed=7)
    first = split_dataset(items, spec)
    second = split_dataset(items, spec)

    assert (len(first.train), len(first.val), len(first.test)) == (1611, 231, 461)
    assert set(first.train) | set(first.val) | set(first.test) == set(items)
    assert not set(first.train) & set(first.val)
    assert not set(first.train) & set(first.test)
    assert not set(first.val) & set(first.test)
    assert first == second


def test_split_seed_changes_partition():
    items = list(range(100))
    a = split_dataset(items, SplitSpec.from_fractions(0.7, 0.1, 0.2, seed=1))
    b = split_dataset(items, SplitSpec.from_fractions(0.7, 0.1, 0.2, seed=2))
    assert a.test != b.test


def test_fraction_allocation_floors_val_and_test():
    assert SplitSpec.from_fractions(0.7, 0.1, 0.2).allocate(2303) == (1613, 230, 460)
    assert SplitSpec.from_fractions(0.6, 0.2, 0.2).allocate(40) == (24, 8, 8)


def test_bad_split_specs():
    with pytest.raises(BadSpec):
        SplitSpec.from_fractions(0.5, 0.2, 0.2)
    with pytest.raises(BadSpec):
        SplitSpec.from_fractions(1.0, 0.0, 0.0)
    with pytest.raises(BadSpec):
        SplitSpec.from_counts(10, -1, 5)
    with pytest.raises(BadSpec):
        SplitSpec.from_counts(10, 2, 5).allocate(20)
    with pytest.raises(BadSpec):
        SplitSpec().allocate(2)


def test_split_describe():
    assert SplitSpec.from_counts(3, 1, 1, seed=4).describe() == {
        "mode": SplitMode.EXACT_COUNTS.value,
        "sizes": [3, 1, 1],
        "seed": 4,
    }


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=3, max_value=400),
    seed=st.integers(min_value=0, max_value=2**31),
    val=st.floats(min_value=0.05, max_value=0.4),
    test=st.floats(min_value=0.05, max_value=0.4),
)
def test_split_is_a_seeded_partition(n: int, seed: int, val: float, test: float):
    spec = SplitSpec.from_fractions(1.0 - val - test, val, test, seed=seed)
    items = list(range(n))
    parts = split_dataset(items, spec)
    assert sorted(parts.train + parts.val + parts.test) == items
    assert (len(parts.train), len(parts.val), len(parts.test)) == spec.allocate(n)
    for part in parts:
        assert part == sorted(part)
    assert split_dataset(items, spec) == parts
