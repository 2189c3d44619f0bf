"""Ablation harness: variants × seeds, paired comparison tables.

Standard variants:
  HLPS       full method.
  HLPS-BL-A  fixed random projection, no GP layer and no representation objective.
  HLPS-BL-B  GP representation trained with a hinge triplet loss (margin 2.0).

The noise and window sweeps expand every variant into one variant per value.
Tables are always built from the per-run metrics files, so re-running
``build_table`` over a finished ablation reproduces the same table.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ._measure_time import measure_time
from .errors import ConfigError
from .trainer import FAILED_MARKER, RunManifest, TrainConfig, final_success, parse_override, run_many

logger = logging.getLogger(__name__)

STANDARD_VARIANTS: dict[str, dict[str, Any]] = {
    "HLPS": {},
    "HLPS-BL-A": {"train.representation": "random_projection"},
    "HLPS-BL-B": {"train.loss_variant": "hinge"},
}
NOISE_LEVELS = (0.0, 0.1, 0.15)
WINDOW_SIZES = (1, 3, 5)


@dataclass
class AblationSpec:
    """Une variante d'ablation.

    Champs:
      variant: identifiant de la variante.
      base: configuration de base commune à toutes les variantes.
      overrides: clés pointées (section.clé) modifiées par rapport à la base.
      seeds: graines exécutées (appariées entre variantes).
      partner: variante de référence pour les deltas appariés (None pour aucune).
    """
    variant: str
    base: TrainConfig
    overrides: dict[str, Any] = field(default_factory=dict)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    partner: str | None = None

    def __post_init__(self) -> None:
        for key in self.overrides:
            parse_override(f"{key}=0")

    def config(self, seed: int) -> TrainConfig:
        data = self.base.to_dict()
        for key, value in self.overrides.items():
            section, name = key.split(".", 1)
            data[section][name] = value
        data["train"]["seed"] = seed
        return TrainConfig.from_dict(data)

    def check_diff(self) -> None:
        """Raise ConfigError if a resolved config differs from the base outside the declared keys."""
        base = _flatten(self.base.to_dict())
        declared = set(self.overrides) | {"train.seed"}
        for seed in self.seeds:
            resolved = _flatten(self.config(seed).to_dict())
            changed = {k for k in resolved if resolved[k] != base.get(k)}
            undeclared = changed - declared
            if undeclared:
                raise ConfigError(f"variant '{self.variant}' changes undeclared keys {sorted(undeclared)}")

    def run_dir(self, root: str | Path, seed: int) -> Path:
        return Path(root) / slug(self.variant) / f"seed_{seed}"


def _flatten(data: dict[str, dict[str, Any]]) -> dict[str, Any]:
    return {f"{section}.{key}": value for section, table in data.items() for key, value in table.items()}


def slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_")


def standard_specs(base: TrainConfig, seeds: Sequence[int] = (0, 1, 2, 3, 4)) -> list[AblationSpec]:
    return [
        AblationSpec(variant=name, base=base, overrides=dict(overrides), seeds=tuple(seeds),
                     partner=None if name == "HLPS" else "HLPS")
        for name, overrides in STANDARD_VARIANTS.items()
    ]


def sweep(specs: Sequence[AblationSpec], key: str, values: Sequence[Any], label: str) -> list[AblationSpec]:
    """One spec per (variant, value); partners are re-targeted to the same value."""
    out = []
    for spec in specs:
        for value in values:
            out.append(dataclasses.replace(
                spec,
                variant=f"{spec.variant} {label}={value}",
                overrides={**spec.overrides, key: value},
                partner=None if spec.partner is None else f"{spec.partner} {label}={value}",
            ))
    return out


def noise_sweep(specs: Sequence[AblationSpec], levels: Sequence[float] = NOISE_LEVELS) -> list[AblationSpec]:
    return sweep(specs, "env.noise_sigma", [float(v) for v in levels], "sigma")


def window_sweep(specs: Sequence[AblationSpec], sizes: Sequence[int] = WINDOW_SIZES) -> list[AblationSpec]:
    return sweep(specs, "train.T", [int(v) for v in sizes], "T")


@dataclass
class TableRow:
    variant: str
    finals: dict[int, float | None]
    failed_seeds: list[int]
    partner: str | None = None
    deltas: dict[int, float] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return bool(self.failed_seeds)

    def _values(self) -> np.ndarray:
        return np.array([v for v in self.finals.values() if v is not None], dtype=float)

    @property
    def mean(self) -> float:
        values = self._values()
        return float(values.mean()) if values.size else float("nan")

    @property
    def std(self) -> float:
        values = self._values()
        return float(values.std()) if values.size else float("nan")

    @property
    def delta_mean(self) -> float:
        return float(np.mean(list(self.deltas.values()))) if self.deltas else float("nan")

    @property
    def delta_std(self) -> float:
        return float(np.std(list(self.deltas.values()))) if self.deltas else float("nan")


@dataclass
class AblationTable:
    rows: list[TableRow]

    @property
    def failed(self) -> bool:
        return any(row.failed for row in self.rows)

    def row(self, variant: str) -> TableRow:
        for row in self.rows:
            if row.variant == variant:
                return row
        raise KeyError(variant)

    def to_markdown(self) -> str:
        lines = [
            "| variant | seeds | final success (mean ± std) | partner | paired delta (mean ± std) | status |",
            "|---|---|---|---|---|---|",
        ]
        for row in self.rows:
            n = len(row._values())
            delta = f"{row.delta_mean:+.3f} ± {row.delta_std:.3f}" if row.deltas else "-"
            status = f"FAILED (seeds {', '.join(map(str, row.failed_seeds))})" if row.failed else "ok"
            lines.append(f"| {row.variant} | {n} | {row.mean:.3f} ± {row.std:.3f} | {row.partner or '-'} | {delta} | {status} |")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        md_path = out_dir / "ablation.md"
        md_path.write_text(self.to_markdown())
        csv_path = out_dir / "ablation.csv"
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variant", "seed", "final_success", "partner", "delta", "failed"])
            for row in self.rows:
                for seed, value in row.finals.items():
                    writer.writerow([
                        row.variant, seed, "" if value is None else repr(value), row.partner or "",
                        repr(row.deltas[seed]) if seed in row.deltas else "", int(seed in row.failed_seeds),
                    ])
        return md_path, csv_path


def build_table(specs: Sequence[AblationSpec], root: str | Path) -> AblationTable:
    """Comparison table from the stored metrics of every (variant, seed) run."""
    rows: dict[str, TableRow] = {}
    for spec in specs:
        finals, failed = {}, []
        for seed in spec.seeds:
            run_dir = spec.run_dir(root, seed)
            if (run_dir / FAILED_MARKER).exists() or not run_dir.exists():
                failed.append(seed)
                finals[seed] = None
            else:
                finals[seed] = final_success(run_dir)
        rows[spec.variant] = TableRow(variant=spec.variant, finals=finals, failed_seeds=failed, partner=spec.partner)
    for row in rows.values():
        partner = rows.get(row.partner) if row.partner else None
        if partner is None:
            continue
        for seed, value in row.finals.items():
            other = partner.finals.get(seed)
            if value is not None and other is not None:
                row.deltas[seed] = value - other
    return AblationTable(rows=list(rows.values()))


def verify_manifests(specs: Sequence[AblationSpec], root: str | Path) -> None:
    """Check every stored manifest against its spec's declared overrides."""
    for spec in specs:
        base = _flatten(spec.base.to_dict())
        declared = set(spec.overrides) | {"train.seed"}
        for seed in spec.seeds:
            path = spec.run_dir(root, seed)
            if not (path / "manifest.json").exists():
                continue
            stored = _flatten(RunManifest.read(path).config)
            changed = {k for k in stored if stored[k] != base.get(k) and not _same(stored[k], base.get(k))}
            if changed - declared:
                raise ConfigError(f"run {path} differs from the base outside {sorted(declared)}: {sorted(changed - declared)}")


def _same(a, b) -> bool:
    # JSON turns tuples into lists
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return list(a) == list(b)
    return False


@measure_time(logger=logger.info)
def run_ablation(specs: Sequence[AblationSpec], root: str | Path, workers: int = 1) -> AblationTable:
    """Run every variant × seed (paired seeds across variants) and write ablation.md/.csv under ``root``."""
    for spec in specs:
        spec.check_diff()
    jobs = [(spec.config(seed), spec.run_dir(root, seed)) for spec in specs for seed in spec.seeds]
    logger.info("running %d ablation runs with %d worker(s)", len(jobs), workers)
    for result in run_many(jobs, workers):
        if result.failed:
            logger.error("run %s failed: %s", result.run_dir, result.error)
    verify_manifests(specs, root)
    table = build_table(specs, root)
    table.write(root)
    return table


def specs_from_overrides(base: TrainConfig, seeds: Sequence[int], variants: Sequence[str] = tuple(STANDARD_VARIANTS),
                         noise: bool = False, window: bool = False) -> list[AblationSpec]:
    unknown = [v for v in variants if v not in STANDARD_VARIANTS]
    if unknown:
        raise ConfigError(f"unknown variants {unknown}, expected some of {list(STANDARD_VARIANTS)}")
    specs = [s for s in standard_specs(base, seeds) if s.variant in variants]
    for spec in specs:
        if spec.partner not in variants:
            spec.partner = None
    if noise:
        specs = noise_sweep(specs)
    if window:
        specs = window_sweep(specs)
    return specs


__all__ = [
    "STANDARD_VARIANTS",
    "AblationSpec",
    "AblationTable",
    "TableRow",
    "standard_specs",
    "noise_sweep",
    "window_sweep",
    "sweep",
    "specs_from_overrides",
    "build_table",
    "run_ablation",
    "verify_manifests",
]
