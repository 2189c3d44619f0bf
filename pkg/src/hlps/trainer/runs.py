"""Run directories: manifest, single-seed runs and multi-seed fan-out.

A run directory holds::

    manifest.json   resolved config, seed, versions (written before training)
    metrics.csv     one MetricsRow per evaluation
    timing.csv      wall-clock per evaluation
    final.ckpt      trainer checkpoint after the last step
    summary.json    final success rate and update counters
    FAILED          present only when the run aborted (holds the error)
"""

from __future__ import annotations

import json
import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .._version import __version__
from ..errors import HLPSError
from .config import TrainConfig
from .loop import FINAL_CHECKPOINT, Trainer, transfer_init
from .metrics import METRICS_FILE, TIMING_FILE, read_metrics

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
SUMMARY_FILE = "summary.json"
FAILED_MARKER = "FAILED"


@dataclass
class RunManifest:
    """Tout ce qu'il faut pour rejouer un run à l'identique.

    Champs:
      config: configuration résolue, toutes valeurs par défaut matérialisées.
      seed: graine du run (dupliquée depuis config pour lecture rapide).
      artifact_version: version du paquet hlps.
      layout: fichiers produits dans le répertoire du run.
      versions: versions de Python, torch et numpy.
      transfer_source: checkpoint source d'un run de transfert (None sinon).
    """
    config: dict
    seed: int
    artifact_version: str = __version__
    layout: dict[str, str] = field(default_factory=lambda: {
        "manifest": MANIFEST_FILE,
        "metrics": METRICS_FILE,
        "timing": TIMING_FILE,
        "checkpoint": FINAL_CHECKPOINT,
        "summary": SUMMARY_FILE,
    })
    versions: dict[str, str] = field(default_factory=lambda: {
        "python": platform.python_version(),
        "torch": torch.__version__,
        "numpy": np.__version__,
    })
    transfer_source: str | None = None

    @classmethod
    def from_config(cls, config: TrainConfig, transfer_source: str | Path | None = None) -> "RunManifest":
        source = None if transfer_source is None else str(transfer_source)
        return cls(config=config.to_dict(), seed=config.seed, transfer_source=source)

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.config)

    def write(self, run_dir: str | Path) -> Path:
        path = Path(run_dir) / MANIFEST_FILE
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_FILE
        return cls(**json.loads(path.read_text()))


@dataclass
class RunResult:
    seed: int
    run_dir: str
    final_success: float | None = None
    steps: int = 0
    updates: list[int] = field(default_factory=list)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def run_training(config: TrainConfig, run_dir: str | Path, progress: bool = False,
                 source: str | Path | None = None) -> RunResult:
    """Train one seed into ``run_dir``; HLPS errors are reported in the result, not raised.

    With ``source``, the run starts from that checkpoint's representation and low-level agent.
    """
    # one intra-op thread keeps float reductions identical between single runs and fan-out workers
    torch.set_num_threads(1)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / FAILED_MARKER).unlink(missing_ok=True)
    RunManifest.from_config(config, source).write(run_dir)
    result = RunResult(seed=config.seed, run_dir=str(run_dir))
    try:
        if source is None:
            trainer = Trainer(config, out_dir=run_dir, progress=progress)
        else:
            trainer = transfer_init(config, source, out_dir=run_dir, progress=progress)
        trainer.train()
    except HLPSError as exc:
        logger.error("run %s failed: %s", run_dir, exc)
        (run_dir / FAILED_MARKER).write_text(f"{type(exc).__name__}: {exc}\n")
        result.error = f"{type(exc).__name__}: {exc}"
        return result
    result.steps = trainer.t
    result.updates = trainer.counters.as_list()
    result.final_success = trainer.metrics[-1].success_rate if trainer.metrics else None
    (run_dir / SUMMARY_FILE).write_text(json.dumps(asdict(result), indent=2, sort_keys=True) + "\n")
    return result


def _run_job(job: tuple[TrainConfig, str]) -> RunResult:
    config, run_dir = job
    return run_training(config, run_dir)


def run_many(jobs: Sequence[tuple[TrainConfig, str | Path]], workers: int = 1) -> list[RunResult]:
    """Independent runs, in parallel processes when ``workers > 1``; results keep job order."""
    jobs = [(config, str(run_dir)) for config, run_dir in jobs]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_job, jobs))


def final_success(run_dir: str | Path) -> float | None:
    """Last logged success rate of a run, None if the run failed or never evaluated."""
    run_dir = Path(run_dir)
    if (run_dir / FAILED_MARKER).exists() or not (run_dir / METRICS_FILE).exists():
        return None
    rows = read_metrics(run_dir / METRICS_FILE)
    return rows[-1].success_rate if rows else None
