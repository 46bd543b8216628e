"""Workspace layout and the lock guarding it."""

import fcntl
import os
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from ..errors import FuzzyJudgeError
from ..judgment import JudgmentSource

LOCK_FILE = ".lock"


class WorkspaceLocked(FuzzyJudgeError):
    """Raised when another process holds the workspace lock."""

    def __init__(self, root: Path):
        self.root = root
        super().__init__(f"Workspace {root} is in use by another process")


class Workspace:
    """Artifact locations under one workspace directory."""

    SPLIT_NAMES = ("train", "val", "test")

    def __init__(self, root: Path):
        self.root = root

    @property
    def corpus(self) -> Path:
        return self.root / "corpus.jsonl"

    @property
    def gold(self) -> Path:
        return self.root / "gold.jsonl"

    @property
    def agreement(self) -> Path:
        return self.root / "agreement.json"

    @property
    def rubric(self) -> Path:
        return self.root / "rubric.json"

    def split(self, name: str) -> Path:
        if name not in self.SPLIT_NAMES:
            raise ValueError(f"Unknown split: {name}")
        return self.root / "splits" / f"{name}.jsonl"

    @property
    def checkpoint(self) -> Path:
        return self.root / "checkpoint"

    def judgments(self, mode: JudgmentSource) -> Path:
        return self.root / "judgments" / f"{mode.value}.jsonl"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"

    @property
    def eval_report(self) -> Path:
        return self.report_dir / "eval_report.json"

    @property
    def report_markdown(self) -> Path:
        return self.report_dir / "report.md"

    @property
    def report_structured(self) -> Path:
        return self.report_dir / "report.json"

    @contextmanager
    def lock(self) -> Iterator[None]:
        """Hold an exclusive advisory lock on the workspace.

        Raises:
            WorkspaceLocked: If another process holds it
        """
        self.root.mkdir(parents=True, exist_ok=True)
        fd = os.open(self.root / LOCK_FILE, os.O_RDWR | os.O_CREAT, 0o644)
        try:
            try:
                fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError:
                raise WorkspaceLocked(self.root) from None
            try:
                yield
            finally:
                fcntl.flock(fd, fcntl.LOCK_UN)
        finally:
            os.close(fd)
