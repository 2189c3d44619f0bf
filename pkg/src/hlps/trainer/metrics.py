"""Metrics rows, update counters and the CSV artefacts of a run."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

METRICS_FILE = "metrics.csv"
TIMING_FILE = "timing.csv"
AGGREGATE_FILE = "aggregate.csv"


@dataclass
class MetricsRow:
    """Une ligne de métriques, écrite à chaque évaluation.

    Champs:
      step: pas d'environnement au moment de l'évaluation (strictement croissant).
      success_rate: taux de succès de l'évaluation déterministe.
      mean_return: retour externe moyen des épisodes d'évaluation.
      repr_loss: moyenne des pertes de représentation depuis la ligne précédente (nan si aucune).
      gamma2, ell, sigma2: hyperparamètres GP courants.
      updates: nombre total de mises à jour effectuées.
      wall_clock: secondes écoulées depuis le début du run (écrit dans timing.csv uniquement).
    """
    step: int
    success_rate: float
    mean_return: float
    repr_loss: float
    gamma2: float
    ell: float
    sigma2: float
    updates: int
    wall_clock: float = 0.0


METRICS_COLUMNS = tuple(f.name for f in fields(MetricsRow) if f.name != "wall_clock")
TIMING_COLUMNS = ("step", "wall_clock")


def _format(value) -> str:
    # repr keeps the shortest exact decimal form, so identical floats give identical files
    return repr(value) if isinstance(value, float) else str(value)


@dataclass
class UpdateCounters:
    """Nombre de mises à jour effectuées par groupe de paramètres."""
    low: int = 0
    high: int = 0
    encoder: int = 0
    hyper: int = 0

    @property
    def total(self) -> int:
        return self.low + self.high + self.encoder + self.hyper

    def as_list(self) -> list[int]:
        return [self.low, self.high, self.encoder, self.hyper]

    def __add__(self, other: "UpdateCounters") -> "UpdateCounters":
        return UpdateCounters(
            low=self.low + other.low,
            high=self.high + other.high,
            encoder=self.encoder + other.encoder,
            hyper=self.hyper + other.hyper,
        )

    def __str__(self) -> str:
        return f"{self.low} low-level, {self.high} high-level, {self.encoder} encoder, {self.hyper} hyperparameter updates"

    def display(self) -> None:
        print(str(self))


class MetricsWriter:
    """Append-only writer for metrics.csv and timing.csv in a run directory.

    A fresh writer truncates both files and writes the header; ``resume=True`` keeps
    existing rows and only appends.
    """

    def __init__(self, out_dir: str | Path, resume: bool = False):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.metrics_path = self.out_dir / METRICS_FILE
        self.timing_path = self.out_dir / TIMING_FILE
        self.last_step = -1
        if resume and self.metrics_path.exists():
            rows = read_metrics(self.metrics_path)
            self.last_step = rows[-1].step if rows else -1
            return
        for path, header in ((self.metrics_path, METRICS_COLUMNS), (self.timing_path, TIMING_COLUMNS)):
            with path.open("w", newline="") as fh:
                csv.writer(fh).writerow(header)

    def append(self, row: MetricsRow) -> None:
        if row.step <= self.last_step:
            raise ValueError(f"metrics step {row.step} does not follow step {self.last_step}")
        with self.metrics_path.open("a", newline="") as fh:
            csv.writer(fh).writerow([_format(getattr(row, c)) for c in METRICS_COLUMNS])
        with self.timing_path.open("a", newline="") as fh:
            csv.writer(fh).writerow([row.step, f"{row.wall_clock:.3f}"])
        self.last_step = row.step


def read_metrics(path: str | Path) -> list[MetricsRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            MetricsRow(
                step=int(r["step"]),
                success_rate=float(r["success_rate"]),
                mean_return=float(r["mean_return"]),
                repr_loss=float(r["repr_loss"]),
                gamma2=float(r["gamma2"]),
                ell=float(r["ell"]),
                sigma2=float(r["sigma2"]),
                updates=int(r["updates"]),
            )
            for r in reader
        ]


@dataclass
class AggregateRow:
    step: int
    n: int
    mean: float
    ci_low: float
    ci_high: float


def confidence_interval(values: Sequence[float], level: float = 0.95) -> tuple[float, float, float]:
    """(mean, low, high) of a Student-t interval; degenerate to the mean for fewer than 2 values."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if values.size < 2:
        return mean, mean, mean
    half = float(stats.t.ppf(0.5 + level / 2, values.size - 1) * values.std(ddof=1) / math.sqrt(values.size))
    return mean, mean - half, mean + half


def aggregate(runs: Iterable[Sequence[MetricsRow]], column: str = "success_rate") -> list[AggregateRow]:
    """Per-step mean and 95% interval of ``column`` over the runs that logged that step."""
    by_step: dict[int, list[float]] = {}
    for rows in runs:
        for row in rows:
            by_step.setdefault(row.step, []).append(getattr(row, column))
    out = []
    for step in sorted(by_step):
        mean, low, high = confidence_interval(by_step[step])
        out.append(AggregateRow(step=step, n=len(by_step[step]), mean=mean, ci_low=low, ci_high=high))
    return out


def write_aggregate(path: str | Path, rows: Sequence[AggregateRow]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in fields(AggregateRow)])
        for row in rows:
            writer.writerow([_format(getattr(row, f.name)) for f in fields(AggregateRow)])
    return path
