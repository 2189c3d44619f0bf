from .checkpoint import MAGIC, VERSION, read_checkpoint, write_checkpoint
from .config import TrainConfig, apply_overrides, load_config, parse_override
from .loop import STREAMS, Trainer, numpy_stream, stored_config, torch_stream, transfer_init
from .metrics import (
    METRICS_COLUMNS,
    AggregateRow,
    MetricsRow,
    MetricsWriter,
    UpdateCounters,
    aggregate,
    confidence_interval,
    read_metrics,
    write_aggregate,
)
from .policy import (
    DUMP_COLUMNS,
    EvalResult,
    HierarchicalPolicy,
    RandomPolicy,
    StraightLinePolicy,
    dump_latent_trajectories,
    evaluate,
    rollout,
)
from .runs import FAILED_MARKER, MANIFEST_FILE, RunManifest, RunResult, final_success, run_many, run_training

__all__ = [
    "TrainConfig",
    "load_config",
    "parse_override",
    "apply_overrides",
    "Trainer",
    "transfer_init",
    "stored_config",
    "STREAMS",
    "numpy_stream",
    "torch_stream",
    "MAGIC",
    "VERSION",
    "read_checkpoint",
    "write_checkpoint",
    "MetricsRow",
    "METRICS_COLUMNS",
    "MetricsWriter",
    "UpdateCounters",
    "AggregateRow",
    "aggregate",
    "confidence_interval",
    "read_metrics",
    "write_aggregate",
    "EvalResult",
    "HierarchicalPolicy",
    "RandomPolicy",
    "StraightLinePolicy",
    "DUMP_COLUMNS",
    "evaluate",
    "rollout",
    "dump_latent_trajectories",
    "RunManifest",
    "RunResult",
    "MANIFEST_FILE",
    "FAILED_MARKER",
    "run_training",
    "run_many",
    "final_success",
]
