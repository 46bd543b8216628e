"""Output formatter - the main entry point for all console output.

Usage:
    output = OutputFormatter(no_color=False)
    output.print(f"{output.symbols.Check} Split written")
    output.print(output.report.summary_table(report))
"""

from typing import Union

from rich.console import Console, RenderableType
from rich.markup import escape
from rich.text import Text

from .report import ReportFormatter
from .symbols import SymbolsFormatter


class OutputFormatter:
    """Rich stdout and stderr consoles plus the sub-formatters.

    Attributes:
        console: The Rich console for output
        symbols: SymbolsFormatter for emoji/ASCII symbols
        report: ReportFormatter for judgments and evaluation tables
    """

    def __init__(self, no_color: bool, verbose: bool = False):
        self._no_color = no_color
        self._verbose = verbose

        self._console = Console(
            no_color=no_color,
            force_terminal=None,
            highlight=False,
        )
        self._stderr_console = Console(
            no_color=no_color,
            force_terminal=None,
            highlight=False,
            stderr=True,
        )

        self._symbols = SymbolsFormatter(no_color=no_color)
        self._report = ReportFormatter(symbols=self._symbols)

    @property
    def console(self) -> Console:
        return self._console

    @property
    def symbols(self) -> SymbolsFormatter:
        return self._symbols

    @property
    def report(self) -> ReportFormatter:
        return self._report

    @property
    def no_color(self) -> bool:
        return self._no_color

    @property
    def verbose(self) -> bool:
        return self._verbose

    def escape(self, message: str) -> str:
        return escape(message)

    def print(self, message: Union[str, RenderableType]) -> None:
        """Print through the Rich console, which strips styles when no_color is set."""
        self._console.print(message, highlight=False)

    def print_detail(self, message: Union[str, RenderableType]) -> None:
        """Print only in verbose mode."""
        if self._verbose:
            self._console.print(message, highlight=False)

    def print_warning(self, message: str) -> None:
        line = Text()
        line.append(f"{self._symbols.Warning} ", style="yellow")
        line.append("Warning: ", style="bold yellow")
        line.append(message)
        self._stderr_console.print(line, highlight=False)

    def print_error(self, message: str) -> None:
        line = Text()
        line.append(f"{self._symbols.Cross} ")
        line.append("Error:", style="bold red")
        line.append(f" {message}")
        self._stderr_console.print(line, highlight=False)
