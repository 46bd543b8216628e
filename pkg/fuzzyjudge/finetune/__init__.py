"""Multi-task fine-tuning of the four-head classifier."""

from .loss import (
    DegenerateDistribution,
    DegenerateDistributionWarning,
    InvalidDistribution,
    LossBreakdown,
    loss_breakdown,
    multitask_loss,
)
from .trainer import (
    EmptyDataset,
    EpochRecord,
    RubricMismatch,
    TrainConfig,
    TrainRun,
    load_train_run,
    open_checkpoint,
    predict,
    train,
)

__all__ = [
    "DegenerateDistribution",
    "DegenerateDistributionWarning",
    "EmptyDataset",
    "EpochRecord",
    "InvalidDistribution",
    "LossBreakdown",
    "RubricMismatch",
    "TrainConfig",
    "TrainRun",
    "load_train_run",
    "loss_breakdown",
    "multitask_loss",
    "open_checkpoint",
    "predict",
    "train",
]
