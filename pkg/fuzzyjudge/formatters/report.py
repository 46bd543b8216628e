"""Rich renderings of judgments and evaluation reports.

All methods return Rich renderables with styling; the console printing them
handles no_color mode.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from rich.table import Table
from rich.text import Text

from ..rubric import CRITERIA_ORDER, get_criterion
from .symbols import SymbolsFormatter

if TYPE_CHECKING:
    from ..judgment import JudgmentResult
    from ..metrics import EvalReport


class ReportFormatter:
    def __init__(self, symbols: SymbolsFormatter):
        self._symbols = symbols

    def format_judgment(self, result: JudgmentResult) -> Text:
        """One line per utterance: id, then ``Criterion=Level`` with flagged levels in yellow."""
        line = Text()
        line.append(result.utterance_id, style="bold cyan")
        line.append(f" [{result.source.value}]", style="dim")
        for criterion in CRITERIA_ORDER:
            judgment = result.judgments[criterion]
            line.append(f" {get_criterion(criterion).display_name}=")
            style = "yellow" if criterion in result.low_confidence_flags else "green"
            line.append(judgment.level.name, style=style)
            if judgment.confidence is not None:
                line.append(f" ({judgment.confidence:.4f})", style="dim")
        return line

    def summary_table(self, report: EvalReport) -> Table:
        """The best system per criterion, as in the Markdown summary."""
        from ..metrics import summary_rows

        table = Table(title=f"{self._symbols.Chart} Evaluation summary", title_justify="left")
        table.add_column("Criterion", style="bold")
        table.add_column("Accuracy", justify="right")
        table.add_column("Weighted avg", justify="right")
        table.add_column("Weighted F1 Score", justify="right")
        table.add_column("Best Model", style="cyan")
        for row in summary_rows(report):
            table.add_row(*row)
        return table

    def systems_table(self, report: EvalReport) -> Table:
        table = Table(title=f"{self._symbols.Scale} Systems", title_justify="left")
        table.add_column("System", style="bold")
        table.add_column("Criterion")
        table.add_column("Accuracy", justify="right")
        table.add_column("Weighted F1 Score", justify="right")
        table.add_column("Failed", justify="right")
        for system in report.ordered_systems():
            evaluation = report.systems[system]
            if not evaluation.scored:
                table.add_row(system.display_name, "-", "-", "-", str(evaluation.errors))
                continue
            for index, criterion in enumerate(CRITERIA_ORDER):
                metrics = evaluation.metrics[criterion]
                table.add_row(
                    system.display_name if index == 0 else "",
                    get_criterion(criterion).display_name,
                    f"{metrics.accuracy:.4f}",
                    f"{metrics.weighted_f1:.4f}",
                    str(evaluation.errors) if index == 0 else "",
                )
        return table
