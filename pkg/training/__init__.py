# This file makes 'training' a Python package
from .experiment_config import ExperimentConfig, ExperimentConfigError, RunSpec
from .sweep_manager import SweepManager, SweepResult, sweep, write_results_csv
from .trainer import TrainConfig, TrainingDivergedError, TrainLog, evaluate, train

__all__ = [
    "ExperimentConfig",
    "ExperimentConfigError",
    "RunSpec",
    "SweepManager",
    "SweepResult",
    "sweep",
    "write_results_csv",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainLog",
    "evaluate",
    "train",
]
