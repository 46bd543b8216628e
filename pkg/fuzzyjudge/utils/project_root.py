"""Locating the project root by its configuration file."""

from pathlib import Path
from typing import Optional

CONFIG_FILE_NAME = "fuzzyjudge.md"


def find_config_file(start_path: Optional[Path] = None) -> Optional[Path]:
    """Find the nearest configuration file walking up from a directory.

    Args:
        start_path: Starting directory (defaults to current directory)

    Returns:
        Path to ``fuzzyjudge.md``, or None if no parent holds one
    """
    if start_path is None:
        start_path = Path.cwd()

    current = start_path.resolve()

    while True:
        candidate = current / CONFIG_FILE_NAME
        if candidate.is_file():
            return candidate

        parent = current.parent
        if parent == current:
            return None

        current = parent


def find_project_root(start_path: Optional[Path] = None) -> Path:
    """Directory holding the nearest configuration file.

    Falls back to the starting directory itself when no configuration file
    exists anywhere above it.
    """
    if start_path is None:
        start_path = Path.cwd()
    config_file = find_config_file(start_path)
    if config_file is None:
        return start_path.resolve()
    return config_file.parent
