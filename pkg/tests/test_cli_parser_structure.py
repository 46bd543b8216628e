from pathlib import Path

import pytest

from fuzzyjudge.cli import CLI, project_path
from fuzzyjudge.config import PipelineConfig
from fuzzyjudge.cli_builder import build_arg_parser


def test_cli_parser_global_defaults():
    parser = build_arg_parser()
    defaults = vars(parser.parse_args(["rubric"]))

    assert defaults["command"] == "rubric"
    assert defaults["config"] is None
    assert defaults["workspace"] is None
    assert defaults["no_color"] is False
    assert defaults["verbose"] is False


def test_judge_defaults():
    args = build_arg_parser().parse_args(["judge"])
    assert args.mode == "hybrid"
    assert args.split == "test"
    assert args.ensemble == 1
    assert args.k is None
    assert args.threshold is None


def test_evaluate_modes_are_repeatable():
    args = build_arg_parser().parse_args(["evaluate", "--mode", "sft", "--mode", "prompt"])
    assert args.modes == ["sft", "prompt"]
    assert args.rejudge is False
    assert build_arg_parser().parse_args(["evaluate"]).modes is None


def test_split_and_train_options():
    split = build_arg_parser().parse_args(["split", "--train", "24", "--val", "8", "--test", "8", "--mode", "counts"])
    assert (split.train, split.val, split.test, split.mode) == (24.0, 8.0, 8.0, "counts")

    train = build_arg_parser().parse_args(["train", "--backend", "bow", "--learning-rate", "0.5", "--epochs", "2"])
    assert train.backend == "bow"
    assert train.learning_rate == 0.5
    assert train.epochs == 2
    assert train.batch_size is None


def test_ingest_bootstrap_phrases_accumulate():
    args = build_arg_parser().parse_args(
        ["ingest", "--bootstrap-phrase", "please start the conversation", "--bootstrap-phrase", "begin"]
    )
    assert args.bootstrap_phrases == ["please start the conversation", "begin"]


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["judge", "--mode", "oracle"],
        ["split", "--mode", "percent"],
        ["report", "--unknown-flag"],
    ],
)
def test_usage_errors_exit_with_two(argv: list[str], capsys: pytest.CaptureFixture[str]):
    assert CLI().run(argv) == 2
    assert "usage:" in capsys.readouterr().err


def test_help_exits_with_zero(capsys: pytest.CaptureFixture[str]):
    assert CLI().run(["--help"]) == 0
    out = capsys.readouterr().out
    for command in ("ingest", "merge", "split", "train", "judge", "evaluate", "report", "rubric"):
        assert command in out


def test_project_path_is_relative_inside_root(tmp_path: Path):
    root = tmp_path.resolve()
    config = PipelineConfig(root=root)
    assert project_path(config, str(root / "data" / "x.csv")) == Path("data/x.csv")
    assert project_path(config, str(root.parent / "x.csv")) == root.parent / "x.csv"
    assert project_path(config, None) is None
