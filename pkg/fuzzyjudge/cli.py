"""Command-line interface for fuzzyjudge."""

import argparse
import sys
import traceback
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .cli_builder import MODES, build_arg_parser
from .config import PipelineConfig, discover_config, split_spec_from_values
from .errors import FuzzyJudgeError
from .formatters import OutputFormatter
from .judgment import JudgmentSource, split_entries
from .pipeline import StageLogger, StageLoggerRaw, Workspace
from .pipeline import steps
from .prompting.exemplars import ExemplarStrategy
from .rubric import criteria_registry


def project_path(config: PipelineConfig, value: Optional[str]) -> Optional[Path]:
    """A path flag, relative to the project root when it lies inside it."""
    if not value:
        return None
    path = Path(value).resolve()
    try:
        return path.relative_to(config.root)
    except ValueError:
        return path


class CLI:
    """Command-line interface for fuzzyjudge."""

    def __init__(self) -> None:
        self.parser = build_arg_parser()

    def run(self, argv: Optional[list[str]] = None) -> int:
        """Run the CLI.

        Args:
            argv: Command-line arguments (defaults to sys.argv[1:])

        Returns:
            Exit code: 0 on success, 1 on a domain error, 2 on a usage error
        """
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as exit_request:
            code = exit_request.code
            return code if isinstance(code, int) else 2

        output = OutputFormatter(no_color=args.no_color, verbose=args.verbose)
        logger = StageLoggerRaw(output)
        sym = output.symbols

        try:
            config = self._apply_overrides(self._load_config(args), args)
            workspace = Workspace(config.workspace)
            with workspace.lock():
                handler = getattr(self, f"_cmd_{args.command}")
                handler(args, config, workspace, output, logger)
            return 0
        except FuzzyJudgeError as err:
            output.print(f"{sym.Cross} [bold red]Error:[/bold red] {output.escape(str(err))}")
            return 1
        except Exception as gen_err:
            output.print(f"\n{sym.Cross} [bold red]Error:[/bold red] {output.escape(str(gen_err))}")
            traceback.print_exc()
            return 1

    def _load_config(self, args: argparse.Namespace) -> PipelineConfig:
        explicit = Path(args.config) if args.config else None
        config = discover_config(Path.cwd(), explicit)
        if args.workspace:
            config = config.with_section("paths", workspace=project_path(config, args.workspace))
        return config

    def _apply_overrides(self, config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
        """Flags win over the configuration file."""
        command = args.command
        if command == "ingest":
            config = config.with_section(
                "paths",
                conversations=project_path(config, args.conversations),
            )
            if args.bootstrap_phrases:
                config = config.with_section("corpus", bootstrap_phrases=tuple(args.bootstrap_phrases))
        elif command == "merge":
            config = config.with_section(
                "paths",
                annotations=project_path(config, args.annotations),
            )
            config = config.with_section("annotation", expected_judges=args.expected_judges)
        elif command == "split":
            config = self._split_overrides(config, args)
        elif command == "train":
            config = config.with_section("backend", classifier=args.backend)
            config = config.with_section(
                "train",
                backbone_id=args.backbone,
                learning_rate=args.learning_rate,
                batch_size=args.batch_size,
                epochs=args.epochs,
                seed=args.seed,
                max_sequence_length=args.max_sequence_length,
            )
        elif command in ("judge", "evaluate"):
            config = config.with_section("backend", generator=args.generator, model=args.model)
            config = config.with_section(
                "prompt",
                k=args.k,
                strategy=ExemplarStrategy.from_string(args.strategy) if args.strategy else None,
                seed=args.prompt_seed,
                retries=args.retries,
                concurrency=args.concurrency,
            )
            if args.threshold is not None:
                config = config.with_section("hybrid", confidence_threshold=args.threshold)
        return config

    def _split_overrides(self, config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
        current = config.split
        sizes_given = any(v is not None for v in (args.train, args.val, args.test))
        if not sizes_given and args.mode is None:
            return config.with_section("split", seed=args.seed)
        sizes = (
            args.train if args.train is not None else float(current.sizes[0]),
            args.val if args.val is not None else float(current.sizes[1]),
            args.test if args.test is not None else float(current.sizes[2]),
        )
        seed = args.seed if args.seed is not None else current.seed
        return replace(config, split=split_spec_from_values(sizes, seed, args.mode))

    def _cmd_ingest(
        self,
        args: argparse.Namespace,
        config: PipelineConfig,
        workspace: Workspace,
        output: OutputFormatter,
        logger: StageLogger,
    ) -> None:
        summary = steps.ingest(config, workspace, logger)
        sym = output.symbols
        output.print(
            f"{sym.File} [dim]Wrote[/dim] [bold]{summary.utterances}[/bold] [dim]utterances from[/dim] "
            f"[bold]{summary.rows}[/bold] [dim]rows to[/dim] {output.escape(str(summary.path))}"
        )

    def _cmd_merge(
        self,
        args: argparse.Namespace,
        config: PipelineConfig,
        workspace: Workspace,
        output: OutputFormatter,
        logger: StageLogger,
    ) -> None:
        summary = steps.merge(config, workspace, logger)
        sym = output.symbols
        output.print(
            f"{sym.Book} [dim]Merged[/dim] [bold]{summary.judges}[/bold] [dim]judges into[/dim] "
            f"[bold]{summary.examples}[/bold] [dim]labeled examples[/dim]"
        )
        for criterion, value in summary.agreement.items():
            output.print(f"  [dim]agreement[/dim] {criterion}: [bold]{value:.4f}[/bold]")

    def _cmd_split(
        self,
        args: argparse.Namespace,
        config: PipelineConfig,
        workspace: Workspace,
        output: OutputFormatter,
        logger: StageLogger,
    ) -> None:
        sizes = steps.split(config, workspace, logger)
        sym = output.symbols
        parts = ", ".join(f"{name} [bold]{count}[/bold]" for name, count in sizes.items())
        output.print(f"{sym.Folder} [dim]Split (seed {config.split.seed}):[/dim] {parts}")

    def _cmd_train(
        self,
        args: argparse.Namespace,
        config: PipelineConfig,
        workspace: Workspace,
        output: OutputFormatter,
        logger: StageLogger,
    ) -> None:
        run = steps.train_classifier(config, workspace, logger)
        sym = output.symbols
        output.print(
            f"{sym.Save} [dim]Best epoch[/dim] [bold]{run.best_epoch}[/bold] "
            f"[dim](val acc {run.best.mean_val_accuracy:.4f}), checkpoint[/dim] "
            f"{output.escape(run.checkpoint.checkpoint_location)}"
        )

    def _cmd_judge(
        self,
        args: argparse.Namespace,
        config: PipelineConfig,
        workspace: Workspace,
        output: OutputFormatter,
        logger: StageLogger,
    ) -> None:
        mode = JudgmentSource.from_string(args.mode)
        summary, entries = steps.judge_split(
            config, workspace, logger, mode, split_name=args.split, ensemble=args.ensemble
        )
        if output.verbose:
            results, _ = split_entries(entries)
            for result in results:
                output.print(output.report.format_judgment(result))
        sym = output.symbols
        output.print(
            f"{sym.Target} [dim]Judged[/dim] [bold]{summary.judged}[/bold] [dim]utterances ({mode.value}),[/dim] "
            f"[bold]{summary.errors}[/bold] [dim]failed,[/dim] [bold]{summary.flagged}[/bold] "
            f"[dim]flagged,[/dim] [bold]{summary.prompt_calls}[/bold] [dim]prompt calls[/dim]"
        )

    def _cmd_evaluate(
        self,
        args: argparse.Namespace,
        config: PipelineConfig,
        workspace: Workspace,
        output: OutputFormatter,
        logger: StageLogger,
    ) -> None:
        names = args.modes or list(MODES)
        modes = [JudgmentSource.from_string(m) for m in dict.fromkeys(names)]
        report = steps.evaluate(config, workspace, logger, modes, rejudge=args.rejudge)
        output.print(output.report.summary_table(report))
        output.print(f"{output.symbols.File} {output.escape(str(workspace.eval_report))}")

    def _cmd_report(
        self,
        args: argparse.Namespace,
        config: PipelineConfig,
        workspace: Workspace,
        output: OutputFormatter,
        logger: StageLogger,
    ) -> None:
        report = steps.render_report(config, workspace, logger)
        output.print(output.report.summary_table(report))
        if args.systems or output.verbose:
            output.print(output.report.systems_table(report))
        for path in (workspace.report_markdown, workspace.report_structured):
            output.print(f"{output.symbols.File} {output.escape(str(path))}")

    def _cmd_rubric(
        self,
        args: argparse.Namespace,
        config: PipelineConfig,
        workspace: Workspace,
        output: OutputFormatter,
        logger: StageLogger,
    ) -> None:
        path = steps.write_rubric(config, workspace)
        for criterion in criteria_registry():
            levels = ", ".join(criterion.display_level(i) for i in range(criterion.level_count))
            output.print(f"[bold]{criterion.display_name}[/bold] [dim]({criterion.id.value}):[/dim] {levels}")
        output.print(f"{output.symbols.File} {output.escape(str(path))}")


def main() -> int:
    """Main entry point."""
    cli = CLI()
    return cli.run()


if __name__ == "__main__":
    sys.exit(main())
