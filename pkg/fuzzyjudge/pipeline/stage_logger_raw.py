"""Raw stage logger: one console line per pipeline event."""

from ..finetune.trainer import EpochRecord
from ..formatters import OutputFormatter
from ..rubric import CRITERIA_ORDER
from .stage_logger import StageLogger


class StageLoggerRaw(StageLogger):
    """Prints stage state changes through OutputFormatter.

    Rich console handles no_color mode automatically.
    """

    def __init__(self, output: OutputFormatter):
        self._output = output

    def _format_duration(self, seconds: float) -> str:
        if seconds < 60.0:
            return f"{seconds:.1f}s"
        minutes = int(seconds // 60)
        secs = seconds % 60
        return f"{minutes}m {secs:.0f}s"

    def mark_running(self, stage: str) -> None:
        sym = self._output.symbols
        label = self._output.escape(stage)
        self._output.print(f"{sym.Play} [dim]start:[/dim] [bold cyan]{label}[/bold cyan]")

    def mark_done(self, stage: str, duration: float) -> None:
        sym = self._output.symbols
        label = self._output.escape(stage)
        duration_str = self._format_duration(duration)
        self._output.print(
            f"{sym.Check} [dim]done:[/dim] [bold cyan]{label}[/bold cyan] [dim]({duration_str})[/dim]"
        )

    def mark_failed(self, stage: str, duration: float, message: str) -> None:
        sym = self._output.symbols
        label = self._output.escape(stage)
        duration_str = self._format_duration(duration)
        self._output.print(
            f"{sym.Cross} [bold red]failed:[/bold red] [bold cyan]{label}[/bold cyan] "
            f"[dim]({duration_str})[/dim] {self._output.escape(message)}"
        )

    def log_epoch(self, record: EpochRecord) -> None:
        per_criterion = " ".join(
            f"{c.value}={record.val_accuracy[c]:.4f}" for c in CRITERIA_ORDER
        )
        self._output.print(
            f"  [dim]epoch {record.epoch}:[/dim] loss [bold]{record.train_loss:.4f}[/bold] "
            f"val acc [bold]{record.mean_val_accuracy:.4f}[/bold]"
        )
        self._output.print_detail(f"    [dim]{per_criterion}[/dim]")

    def info(self, message: str) -> None:
        sym = self._output.symbols
        self._output.print(f"{sym.Info} {self._output.escape(message)}")

    def warn(self, message: str) -> None:
        self._output.print_warning(message)
