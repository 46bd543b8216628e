"""Pytest configuration and shared fixtures."""

import os
import shutil
import subprocess
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

import pytest

from fuzzyjudge.annotation import JudgeAnnotation, LabeledExample
from fuzzyjudge.corpus import Utterance
from fuzzyjudge.rubric import CRITERIA_ORDER, LevelIndex


@pytest.fixture(scope="session")
def project_root() -> Path:
    """Return the project root directory."""
    return Path(__file__).parent.parent


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def judge_command() -> list[str]:
    """Run the CLI as a module so the tests exercise the working tree."""
    return [sys.executable, "-m", "fuzzyjudge"]


@pytest.fixture
def pipeline_project(tmp_path: Path, fixtures_dir: Path) -> Path:
    """A private copy of the bundled 50-row project (config, export, annotations)."""
    target = tmp_path / "project"
    shutil.copytree(fixtures_dir / "project", target)
    return target


def make_utterance(utterance_id: str, text: Optional[str] = None) -> Utterance:
    return Utterance(utterance_id=utterance_id, text=text or f"utterance {utterance_id}", case_id="case-1")


def make_example(
    utterance_id: str,
    labels: Sequence[int],
    text: Optional[str] = None,
) -> LabeledExample:
    """Labeled example from four level indices in registry order."""
    return LabeledExample(
        utterance=make_utterance(utterance_id, text),
        gold={c: LevelIndex(c, i) for c, i in zip(CRITERIA_ORDER, labels, strict=True)},
    )


def make_annotation(judge_id: str, utterance_id: str, labels: Sequence[int]) -> JudgeAnnotation:
    return JudgeAnnotation.from_indices(judge_id, utterance_id, labels)


class JudgeRunner:
    """Helper class for running judge commands and capturing output."""

    def __init__(self, command: list[str], cwd: Path, source_root: Path):
        self.command = command
        self.cwd = cwd
        self.env = dict(os.environ)
        self.env["PYTHONPATH"] = os.pathsep.join(
            p for p in (str(source_root), self.env.get("PYTHONPATH", "")) if p
        )
        # Keep Rich from wrapping lines that the assertions look for.
        self.env["COLUMNS"] = "200"

    def run(
        self,
        args: list[str],
        check: bool = True,
        timeout: int = 300,
    ) -> subprocess.CompletedProcess[str]:
        """Run judge with the given arguments (colors always off).

        Args:
            args: Arguments to pass to judge
            check: If True, raise CalledProcessError on non-zero exit
            timeout: Command timeout in seconds
        """
        return subprocess.run(
            self.command + ["--no-color", *args],
            cwd=self.cwd,
            env=self.env,
            check=check,
            capture_output=True,
            text=True,
            timeout=timeout,
        )

    def run_success(self, args: list[str], **kwargs: Any) -> subprocess.CompletedProcess[str]:
        """Run judge and assert success."""
        result = self.run(args, check=False, **kwargs)
        assert result.returncode == 0, f"exit {result.returncode}:\n{result.stdout}\n{result.stderr}"
        return result

    def run_failure(
        self, args: list[str], exit_code: int = 1, **kwargs: Any
    ) -> subprocess.CompletedProcess[str]:
        """Run judge and assert the given failing exit code."""
        result = self.run(args, check=False, **kwargs)
        assert result.returncode == exit_code, (
            f"expected exit {exit_code}, got {result.returncode}:\n{result.stdout}\n{result.stderr}"
        )
        return result

    def assert_in_output(self, result: subprocess.CompletedProcess[str], text: str) -> None:
        """Assert that text appears in stdout or stderr."""
        combined = result.stdout + result.stderr
        assert text in combined, f"Expected '{text}' in output:\n{combined}"

    def assert_file_exists(self, path: Path | str) -> None:
        file_path = Path(path)
        if not file_path.is_absolute():
            file_path = self.cwd / file_path
        assert file_path.exists(), f"Expected file to exist: {file_path}"


@pytest.fixture
def judge(judge_command: list[str], project_root: Path, pipeline_project: Path) -> JudgeRunner:
    """A JudgeRunner working inside a fresh copy of the fixture project."""
    return JudgeRunner(judge_command, pipeline_project, project_root)
