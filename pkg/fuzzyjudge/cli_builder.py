"""Factory for constructing the CLI argument parser."""

import argparse

MODES = ("sft", "prompt", "hybrid")
SPLITS = ("train", "val", "test")


def _add_prompt_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--generator", type=str, help="Generation backend name (overrides config)")
    parser.add_argument("--model", type=str, help="Model id for the remote or local generator")
    parser.add_argument("--k", type=int, help="Number of few-shot exemplars")
    parser.add_argument(
        "--strategy",
        choices=["fixed", "random_seeded"],
        help="Exemplar selection strategy",
    )
    parser.add_argument("--prompt-seed", dest="prompt_seed", type=int, help="Exemplar selection seed")
    parser.add_argument("--retries", type=int, help="Completion attempts per utterance")
    parser.add_argument("--concurrency", type=int, help="Concurrent generation requests")
    parser.add_argument(
        "--threshold",
        type=float,
        help="Hybrid confidence threshold in [0, 1]",
    )


def build_arg_parser() -> argparse.ArgumentParser:
    """Construct the argparse parser for the CLI."""
    parser = argparse.ArgumentParser(
        prog="judge",
        description="fuzzyjudge - rate student utterances on fuzzy rubric criteria",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    parser.add_argument(
        "--config",
        type=str,
        help="Configuration file (default: nearest fuzzyjudge.md upwards)",
    )
    parser.add_argument(
        "--workspace",
        type=str,
        help="Workspace directory for artifacts (default: .fzj under the project root)",
    )
    parser.add_argument(
        "--no-color",
        dest="no_color",
        action="store_true",
        help="Disable colored output",
    )
    parser.add_argument(
        "--verbose",
        dest="verbose",
        action="store_true",
        help="Print per-criterion details and individual judgments",
    )

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    ingest = subparsers.add_parser("ingest", help="Extract cleaned utterances from a conversation export")
    ingest.add_argument("--conversations", type=str, help="Conversation export CSV")
    ingest.add_argument(
        "--bootstrap-phrase",
        dest="bootstrap_phrases",
        action="append",
        help="Leading phrase to strip from messages (repeatable)",
    )

    merge = subparsers.add_parser("merge", help="Merge judge annotations into consensus labels")
    merge.add_argument("--annotations", type=str, help="Directory of per-judge annotation CSVs")
    merge.add_argument("--expected-judges", dest="expected_judges", type=int, help="Expected judge count")

    split = subparsers.add_parser("split", help="Partition the gold dataset into train/val/test")
    split.add_argument("--train", type=float, help="Train size (count or fraction)")
    split.add_argument("--val", type=float, help="Validation size (count or fraction)")
    split.add_argument("--test", type=float, help="Test size (count or fraction)")
    split.add_argument("--seed", type=int, help="Shuffle seed")
    split.add_argument("--mode", choices=["fractions", "counts"], help="Interpret sizes as fractions or counts")

    train = subparsers.add_parser("train", help="Fine-tune the multi-head classifier")
    train.add_argument("--backend", type=str, help="Classifier backend name")
    train.add_argument("--backbone", type=str, help="Pre-trained encoder id")
    train.add_argument("--learning-rate", dest="learning_rate", type=float)
    train.add_argument("--batch-size", dest="batch_size", type=int)
    train.add_argument("--epochs", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--max-sequence-length", dest="max_sequence_length", type=int)

    judge = subparsers.add_parser("judge", help="Judge a split with one mode")
    judge.add_argument("--mode", choices=MODES, default="hybrid", help="Judging mode (default: hybrid)")
    judge.add_argument("--split", choices=SPLITS, default="test", help="Split to judge (default: test)")
    judge.add_argument(
        "--ensemble",
        type=int,
        default=1,
        help="Number of judging passes aggregated by vote (default: 1)",
    )
    _add_prompt_options(judge)

    evaluate = subparsers.add_parser("evaluate", help="Score judging modes on the test split")
    evaluate.add_argument(
        "--mode",
        dest="modes",
        choices=MODES,
        action="append",
        help="Mode to evaluate (repeatable, default: all)",
    )
    evaluate.add_argument(
        "--rejudge",
        action="store_true",
        help="Recompute judgments even when stored ones are current",
    )
    _add_prompt_options(evaluate)

    report = subparsers.add_parser("report", help="Render the evaluation report")
    report.add_argument(
        "--systems",
        action="store_true",
        help="Also print the per-system table",
    )

    subparsers.add_parser("rubric", help="Write the rubric description")

    return parser
