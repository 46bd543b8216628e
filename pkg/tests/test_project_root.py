"""Tests for project root detection by the configuration file."""

from pathlib import Path

import pytest

from fuzzyjudge.utils.project_root import CONFIG_FILE_NAME, find_config_file, find_project_root


@pytest.fixture
def fake_project(tmp_path: Path) -> Path:
    """Create a project directory holding a configuration file."""
    (tmp_path / CONFIG_FILE_NAME).write_text("# split\n")
    return tmp_path


def test_finds_root_from_nested_directory(fake_project: Path):
    nested = fake_project / "a" / "b" / "c"
    nested.mkdir(parents=True)
    assert find_project_root(nested) == fake_project.resolve()
    assert find_config_file(nested) == fake_project.resolve() / CONFIG_FILE_NAME


def test_nearest_config_wins(fake_project: Path):
    """A nested project must not resolve to the enclosing one."""
    inner = fake_project / "experiments" / "k4"
    inner.mkdir(parents=True)
    (inner / CONFIG_FILE_NAME).write_text("# prompt\n")
    subdir = inner / "data"
    subdir.mkdir()
    assert find_project_root(subdir) == inner.resolve()


def test_directory_named_like_config_is_ignored(tmp_path: Path):
    (tmp_path / "project" / CONFIG_FILE_NAME).mkdir(parents=True)
    start = tmp_path / "project"
    assert find_config_file(start) != start.resolve() / CONFIG_FILE_NAME


def test_falls_back_to_start_without_config(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setattr("fuzzyjudge.utils.project_root.find_config_file", lambda start: None)
    isolated = tmp_path / "no_config_here"
    isolated.mkdir()
    assert find_project_root(isolated) == isolated.resolve()


def test_finds_root_at_start_path(fake_project: Path):
    assert find_project_root(fake_project) == fake_project.resolve()
