from ._measure_time import measure_time
from ._paths import default_out_dir, path_configs, path_out
from ._version import __version__
from .envs import MazeConfig, PointMaze, load_layout
from .errors import (
    AutodiffError,
    CheckpointError,
    ConfigError,
    GPError,
    HLPSError,
    NonFiniteGradientError,
    ObjectiveError,
    RepresentationError,
    StateSpaceError,
    TrainingError,
    TransferError,
)
from .gp import GPHyperparams, batch_posterior, filter_trajectory
from .objective import LossOptions, hlps_loss, window_loss
from .representation import RepresentationModel
from .rl import ReplayBuffer, SacAgent, SacConfig
from .trainer import TrainConfig, Trainer, load_config, run_training, transfer_init

__all__ = [
    "__version__",
    "measure_time",
    "path_out",
    "path_configs",
    "default_out_dir",
    "HLPSError",
    "ConfigError",
    "AutodiffError",
    "NonFiniteGradientError",
    "GPError",
    "StateSpaceError",
    "RepresentationError",
    "ObjectiveError",
    "TrainingError",
    "CheckpointError",
    "TransferError",
    "MazeConfig",
    "PointMaze",
    "load_layout",
    "GPHyperparams",
    "batch_posterior",
    "filter_trajectory",
    "RepresentationModel",
    "LossOptions",
    "hlps_loss",
    "window_loss",
    "SacAgent",
    "SacConfig",
    "ReplayBuffer",
    "TrainConfig",
    "Trainer",
    "load_config",
    "run_training",
    "transfer_init",
]
