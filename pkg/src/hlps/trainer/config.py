"""Training configuration: dataclasses, TOML loading and dotted overrides.

A config file has up to three tables::

    [train]            # TrainConfig scalars (k, m, T, seed, ...)
    [env]              # MazeConfig
    [sac]              # SacConfig shared by both levels

Unknown keys and invalid values raise ConfigError anchored to the line of the file
that set them.
"""

from __future__ import annotations

import dataclasses
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport with the same API
    import tomli as tomllib

from ..envs import MazeConfig
from ..errors import ConfigError
from ..objective import LOSS_VARIANTS
from ..representation import REPRESENTATION_VARIANTS
from ..rl import SacConfig

SECTIONS = ("train", "env", "sac")


@dataclass
class TrainConfig:
    """Configuration complète d'un run d'entraînement.

    Champs:
      k: intervalle des actions haut niveau (pas primitifs par sous-objectif).
      m: fréquence des mises à jour des hyperparamètres GP.
      T: taille de la fenêtre de lot, en segments haut niveau.
      total_steps: nombre total de pas d'environnement.
      eval_every: période d'évaluation (doit être >= k).
      eval_episodes: épisodes par évaluation.
      warmup_steps: pas à actions uniformes avant toute mise à jour.
      repr_batch_size / hyper_batch_size: triplets par mise à jour de l'encodeur, fenêtres par mise à jour GP.
      loss_variant / representation: drapeaux d'ablation.
      latent_bound_min: borne minimale L de la boîte latente [-L, L]^d du haut niveau.
    """
    seed: int = 0
    total_steps: int = 300_000
    k: int = 50
    m: int = 100
    T: int = 3
    eval_every: int = 25_000
    eval_episodes: int = 10
    warmup_steps: int = 2000
    buffer_capacity: int = 1_000_000
    repr_batch_size: int = 128
    hyper_batch_size: int = 32
    encoder_lr: float = 1e-4
    gp_lr: float = 1e-5
    latent_dim: int = 2
    encoder_hidden: int = 100
    gp_gamma2: float = 1.0
    gp_ell: float = 1.0
    gp_sigma2: float = 0.1
    loss_variant: str = "hlps"
    ratio_grad: bool = False
    margin: float = 2.0
    representation: str = "hlps"
    latent_bound_min: float = 10.0
    env: MazeConfig = field(default_factory=MazeConfig)
    sac: SacConfig = field(default_factory=SacConfig)

    def __post_init__(self) -> None:
        for name in ("k", "m", "T", "eval_episodes", "buffer_capacity", "repr_batch_size", "hyper_batch_size", "latent_dim", "encoder_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be >= 1, got {getattr(self, name)}")
        for name in ("total_steps", "warmup_steps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"train.{name} must be >= 0, got {getattr(self, name)}")
        if self.eval_every < self.k:
            raise ConfigError(f"train.eval_every ({self.eval_every}) must be >= train.k ({self.k})")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError(f"train.loss_variant must be one of {LOSS_VARIANTS}, got '{self.loss_variant}'")
        if self.representation not in REPRESENTATION_VARIANTS:
            raise ConfigError(f"train.representation must be one of {REPRESENTATION_VARIANTS}, got '{self.representation}'")
        for name in ("encoder_lr", "gp_lr", "gp_gamma2", "gp_ell", "gp_sigma2", "latent_bound_min"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"train.{name} must be > 0, got {getattr(self, name)}")
        if self.sac.batch_size < 1 or self.sac.hidden < 1:
            raise ConfigError("sac.batch_size and sac.hidden must be >= 1")
        if not 0 < self.sac.tau <= 1 or not 0 <= self.sac.gamma <= 1:
            raise ConfigError(f"sac.tau must be in (0, 1] and sac.gamma in [0, 1], got {self.sac.tau}, {self.sac.gamma}")

    def to_dict(self) -> dict[str, dict[str, Any]]:
        """All values materialised, one table per section (JSON-serialisable)."""
        train = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name not in ("env", "sac")}
        return {"train": train, "env": dataclasses.asdict(self.env), "sac": dataclasses.asdict(self.sac)}

    @classmethod
    def from_dict(cls, data: dict[str, dict[str, Any]], source: str | None = None) -> "TrainConfig":
        """Build from section tables; ``source`` is the TOML text used to anchor errors to lines."""
        unknown = set(data) - set(SECTIONS)
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError(f"unknown section '{name}', expected one of {SECTIONS}", line=_locate(source, None, name))
        env = _build(MazeConfig, "env", data.get("env", {}), source)
        sac = _build(SacConfig, "sac", data.get("sac", {}), source)
        return _build(cls, "train", {**data.get("train", {}), "env": env, "sac": sac}, source)

    def replace(self, **changes: Any) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


_KEY_RE = r"^\s*{key}\s*="
_SECTION_RE = re.compile(r"^\s*\[\s*([A-Za-z0-9_.]+)\s*\]")


def _locate(source: str | None, section: str | None, key: str) -> int | None:
    """1-based line where ``key`` is assigned inside ``[section]``.

    With ``section=None`` the key is looked up at top level, where it is either a
    table header or a bare assignment before the first header.
    """
    if source is None:
        return None
    current = None
    key_re = re.compile(_KEY_RE.format(key=re.escape(key)))
    for number, line in enumerate(source.splitlines(), start=1):
        header = _SECTION_RE.match(line)
        if header:
            current = header.group(1)
            if section is None and current == key:
                return number
            continue
        if current == section and key_re.match(line):
            return number
    return None


def _build(cls, section: str, values: dict[str, Any], source: str | None):
    known = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"unknown key '{section}.{key}'", line=_locate(source, section, key))
    try:
        return cls(**values)
    except ConfigError as exc:
        if exc.line is not None or source is None:
            raise
        match = re.search(rf"{section}\.(\w+)", str(exc))
        line = _locate(source, section, match.group(1)) if match else None
        raise ConfigError(str(exc), line=line) from None
    except TypeError as exc:
        raise ConfigError(f"invalid value in [{section}]: {exc}") from None


def parse_override(text: str) -> tuple[str, str, Any]:
    """'section.key=value' -> (section, key, value); value is a TOML literal, else a bare string."""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form section.key=value")
    path, raw = text.split("=", 1)
    parts = path.strip().split(".")
    if len(parts) != 2 or parts[0] not in SECTIONS or not parts[1]:
        raise ConfigError(f"override key '{path.strip()}' must be section.key with section in {SECTIONS}")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return parts[0], parts[1], value


def apply_overrides(data: dict[str, dict[str, Any]], overrides: Iterable[str]) -> dict[str, dict[str, Any]]:
    merged = {section: dict(table) for section, table in data.items()}
    for text in overrides:
        section, key, value = parse_override(text)
        merged.setdefault(section, {})[key] = value
    return merged


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> TrainConfig:
    """Read a TOML config (defaults when ``path`` is None) and apply dotted overrides.

    Raises:
        ConfigError: unreadable file, TOML syntax error, unknown key or invalid value.
    """
    source = None
    data: dict[str, dict[str, Any]] = {}
    if path is not None:
        path = Path(path)
        try:
            source = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file '{path}': {exc.strerror}") from None
        try:
            data = tomllib.loads(source)
        except tomllib.TOMLDecodeError as exc:
            match = re.search(r"line (\d+)", str(exc))
            raise ConfigError(f"TOML syntax error: {exc}", line=int(match.group(1)) if match else None) from None
        for section, table in data.items():
            if not isinstance(table, dict):
                raise ConfigError(f"top-level key '{section}' must be a table", line=_locate(source, None, section))
    return TrainConfig.from_dict(apply_overrides(data, overrides), source)
