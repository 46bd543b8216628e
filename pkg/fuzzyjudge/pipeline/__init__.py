"""Pipeline steps, progress logging and the workspace."""

from .stage_logger import StageLogger, StageLoggerQuiet, timed_stage
from .stage_logger_raw import StageLoggerRaw
from .workspace import Workspace, WorkspaceLocked

__all__ = [
    "StageLogger",
    "StageLoggerQuiet",
    "StageLoggerRaw",
    "Workspace",
    "WorkspaceLocked",
    "timed_stage",
]
