"""Console output formatting.

The main entry point is `OutputFormatter`, which owns the Rich consoles and
the sub-formatters.
"""

from .output import OutputFormatter
from .report import ReportFormatter
from .symbols import Symbols, SymbolsFormatter

__all__ = [
    "OutputFormatter",
    "ReportFormatter",
    "Symbols",
    "SymbolsFormatter",
]
