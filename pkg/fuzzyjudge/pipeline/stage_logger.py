"""Stage logger base class for pipeline progress reporting.

See stage_logger_raw.py for the console implementation.
"""

import time
from abc import ABC, abstractmethod
from collections.abc import Iterator
from contextlib import contextmanager

from ..finetune.trainer import EpochRecord


class StageLogger(ABC):
    """Reports pipeline stage progress.

    Implementations decide how (and whether) events are displayed.
    """

    @abstractmethod
    def mark_running(self, stage: str) -> None:
        """Mark a stage as started."""

    @abstractmethod
    def mark_done(self, stage: str, duration: float) -> None:
        """Mark a stage as done.

        Args:
            stage: The stage that completed
            duration: Execution duration in seconds
        """

    @abstractmethod
    def mark_failed(self, stage: str, duration: float, message: str) -> None:
        """Mark a stage as failed."""

    @abstractmethod
    def log_epoch(self, record: EpochRecord) -> None:
        """Report one finished training epoch."""

    @abstractmethod
    def info(self, message: str) -> None:
        pass

    @abstractmethod
    def warn(self, message: str) -> None:
        pass


class StageLoggerQuiet(StageLogger):
    """Discards every event."""

    def mark_running(self, stage: str) -> None:
        pass

    def mark_done(self, stage: str, duration: float) -> None:
        pass

    def mark_failed(self, stage: str, duration: float, message: str) -> None:
        pass

    def log_epoch(self, record: EpochRecord) -> None:
        pass

    def info(self, message: str) -> None:
        pass

    def warn(self, message: str) -> None:
        pass


@contextmanager
def timed_stage(logger: StageLogger, stage: str) -> Iterator[None]:
    """Bracket a block with running/done events, or failed on error."""
    start = time.monotonic()
    logger.mark_running(stage)
    try:
        yield
    except Exception as exc:
        logger.mark_failed(stage, time.monotonic() - start, str(exc))
        raise
    logger.mark_done(stage, time.monotonic() - start)
