"""Utility functions for fuzzyjudge."""

from .project_root import CONFIG_FILE_NAME, find_config_file, find_project_root

__all__ = ["CONFIG_FILE_NAME", "find_config_file", "find_project_root"]
