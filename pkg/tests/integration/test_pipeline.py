"""Integration tests running the judge CLI over the bundled fixture project."""

import json
from pathlib import Path

import numpy as np
import pytest

from fuzzyjudge.metrics import SUMMARY_HEADER
from fuzzyjudge.utils.artifacts import file_fingerprint, read_jsonl
from tests.conftest import JudgeRunner

PIPELINE = [
    ["ingest"],
    ["merge"],
    ["split"],
    ["train"],
    ["judge", "--mode", "hybrid"],
    ["evaluate"],
    ["report"],
]

TEXT_ARTIFACTS = [
    "corpus.jsonl",
    "gold.jsonl",
    "agreement.json",
    "splits/train.jsonl",
    "splits/val.jsonl",
    "splits/test.jsonl",
    "checkpoint/config.json",
    "checkpoint/rubric.json",
    "checkpoint/train_run.jsonl",
    "judgments/hybrid.jsonl",
    "judgments/sft.jsonl",
    "judgments/prompt.jsonl",
    "report/eval_report.json",
    "report/report.md",
    "report/report.json",
]


def run_pipeline(judge: JudgeRunner) -> None:
    for args in PIPELINE:
        judge.run_success(args)


def fingerprints(workspace: Path) -> dict[str, str]:
    return {name: file_fingerprint(workspace / name) for name in TEXT_ARTIFACTS}


@pytest.mark.integration
class TestPipeline:
    """End-to-end runs of every subcommand."""

    def test_full_pipeline_writes_every_artifact(self, judge: JudgeRunner):
        result = judge.run_success(["ingest"])
        judge.assert_in_output(result, "Wrote 40 utterances from 50 rows")

        result = judge.run_success(["merge"])
        judge.assert_in_output(result, "Merged 7 judges into 40 labeled examples")

        result = judge.run_success(["split"])
        judge.assert_in_output(result, "train 24, val 8, test 8")

        result = judge.run_success(["train"])
        judge.assert_in_output(result, "epoch 6:")
        judge.assert_in_output(result, "Best epoch")

        result = judge.run_success(["judge", "--mode", "hybrid"])
        judge.assert_in_output(result, "Judged 8 utterances (hybrid), 0 failed")

        result = judge.run_success(["evaluate"])
        judge.assert_in_output(result, "Evaluation summary")
        judge.assert_in_output(result, "Reusing")

        judge.run_success(["report"])
        for name in TEXT_ARTIFACTS:
            judge.assert_file_exists(Path(".fzj") / name)
        judge.assert_file_exists(".fzj/checkpoint/weights.npz")

        markdown = (judge.cwd / ".fzj" / "report" / "report.md").read_text()
        assert markdown.startswith("# Evaluation report")
        assert SUMMARY_HEADER in markdown

        structured = json.loads((judge.cwd / ".fzj" / "report" / "report.json").read_text())
        assert set(structured["systems"]) == {"hybrid", "sft", "prompt", "majority"}
        assert set(structured["best"]) == {
            "professionalism",
            "medical_relevance",
            "ethical_behavior",
            "contextual_distraction",
        }

    def test_bootstrap_messages_are_cleaned(self, judge: JudgeRunner):
        judge.run_success(["ingest"])
        _, records = read_jsonl(judge.cwd / ".fzj" / "corpus.jsonl")
        ids = [r["utterance_id"] for r in records]
        assert len(ids) == 40
        assert not any(i.endswith(":1") for i in ids)
        assert all("please start the conversation" not in r["text"].lower() for r in records)

    def test_rerun_is_identical_apart_from_timestamps(self, judge: JudgeRunner):
        run_pipeline(judge)
        workspace = judge.cwd / ".fzj"
        first = fingerprints(workspace)
        with np.load(workspace / "checkpoint" / "weights.npz") as archive:
            first_weights = {k: archive[k].copy() for k in archive.files}

        run_pipeline(judge)
        assert fingerprints(workspace) == first
        with np.load(workspace / "checkpoint" / "weights.npz") as archive:
            assert set(archive.files) == set(first_weights)
            for key in archive.files:
                assert np.array_equal(archive[key], first_weights[key])

    def test_evaluate_judges_again_after_resplit(self, judge: JudgeRunner):
        run_pipeline(judge)
        judge.run_success(["split", "--seed", "99"])
        result = judge.run_success(["evaluate"])
        judge.assert_in_output(result, "Stale judgments")
        assert "Reusing" not in result.stdout + result.stderr

        test_split = file_fingerprint(judge.cwd / ".fzj" / "splits" / "test.jsonl")
        for mode in ("hybrid", "sft", "prompt"):
            meta, _ = read_jsonl(judge.cwd / ".fzj" / "judgments" / f"{mode}.jsonl")
            assert meta["inputs"]["test"] == test_split

    def test_evaluate_judges_again_after_threshold_change(self, judge: JudgeRunner):
        run_pipeline(judge)
        result = judge.run_success(["evaluate", "--mode", "hybrid", "--threshold", "0.95"])
        judge.assert_in_output(result, "Stale judgments")
        meta, _ = read_jsonl(judge.cwd / ".fzj" / "judgments" / "hybrid.jsonl")
        assert meta["config"]["hybrid"] == {"confidence_threshold": 0.95}

    def test_explicit_split_counts(self, judge: JudgeRunner):
        judge.run_success(["ingest"])
        judge.run_success(["merge"])
        result = judge.run_success(["split", "--train", "30", "--val", "5", "--test", "5", "--seed", "11"])
        judge.assert_in_output(result, "Split (seed 11): train 30, val 5, test 5")

        meta, records = read_jsonl(judge.cwd / ".fzj" / "splits" / "test.jsonl")
        assert len(records) == 5
        assert meta["config"]["split"] == {"mode": "exact_counts", "sizes": [30, 5, 5], "seed": 11}

    def test_split_counts_allow_empty_validation(self, judge: JudgeRunner):
        judge.run_success(["ingest"])
        judge.run_success(["merge"])
        result = judge.run_success(["split", "--train", "30", "--val", "0", "--test", "10"])
        judge.assert_in_output(result, "train 30, val 0, test 10")

    def test_split_counts_must_cover_dataset(self, judge: JudgeRunner):
        judge.run_success(["ingest"])
        judge.run_success(["merge"])
        result = judge.run_failure(["split", "--train", "20", "--val", "5", "--test", "5"])
        judge.assert_in_output(result, "sum to 30, expected 40")

    def test_prompt_mode_needs_no_checkpoint(self, judge: JudgeRunner):
        for args in (["ingest"], ["merge"], ["split"]):
            judge.run_success(args)
        result = judge.run_success(["judge", "--mode", "prompt", "--ensemble", "3"])
        judge.assert_in_output(result, "Judged 8 utterances (prompt)")
        meta, records = read_jsonl(judge.cwd / ".fzj" / "judgments" / "prompt.jsonl")
        assert meta["ensemble"] == 3
        assert len(records) == 8

    def test_hybrid_without_checkpoint_fails(self, judge: JudgeRunner):
        for args in (["ingest"], ["merge"], ["split"]):
            judge.run_success(args)
        result = judge.run_failure(["evaluate", "--mode", "hybrid"])
        judge.assert_in_output(result, "no checkpoint")

    def test_merge_before_ingest_fails(self, judge: JudgeRunner):
        result = judge.run_failure(["merge"])
        judge.assert_in_output(result, "Missing artifact")

    def test_report_before_evaluate_fails(self, judge: JudgeRunner):
        result = judge.run_failure(["report"])
        judge.assert_in_output(result, "run `judge evaluate` first")

    def test_invalid_config_reports_location(self, judge: JudgeRunner):
        config = judge.cwd / "fuzzyjudge.md"
        config.write_text(config.read_text() + "\n# extras\n")
        result = judge.run_failure(["rubric"])
        judge.assert_in_output(result, "Unknown section 'extras'")

    def test_rubric_command(self, judge: JudgeRunner):
        result = judge.run_success(["rubric"])
        judge.assert_in_output(result, "Professionalism (professionalism): 1. Unprofessional")
        judge.assert_in_output(result, "5. Safe")
        judge.assert_file_exists(".fzj/rubric.json")

    def test_workspace_flag(self, judge: JudgeRunner):
        judge.run_success(["--workspace", "elsewhere", "ingest"])
        judge.assert_file_exists("elsewhere/corpus.jsonl")
        meta, _ = read_jsonl(judge.cwd / "elsewhere" / "corpus.jsonl")
        assert meta["config"]["paths"]["workspace"] == "elsewhere"

    def test_path_flags_inside_project_stay_relative(self, judge: JudgeRunner):
        source = (judge.cwd / "data" / "conversations.csv").resolve()
        judge.run_success(["ingest", "--conversations", str(source)])
        meta, _ = read_jsonl(judge.cwd / ".fzj" / "corpus.jsonl")
        assert meta["config"]["paths"]["conversations"] == "data/conversations.csv"

    def test_help_and_usage_errors(self, judge: JudgeRunner):
        result = judge.run_success(["--help"])
        judge.assert_in_output(result, "usage: judge")
        judge.run_failure(["--definitely-not-a-flag"], exit_code=2)
        judge.run_failure(["judge", "--mode", "oracle"], exit_code=2)
