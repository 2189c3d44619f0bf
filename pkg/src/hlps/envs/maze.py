"""Continuous point-mass mazes with Gaussian position noise.

Layouts are text grids ('#' wall, '.' free), one character per unit cell, first
line at the top. The maze occupies [0, width] × [0, height]; an observation is
(x, y, vx, vy, remaining time fraction, goal x, goal y).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigError

logger = logging.getLogger(__name__)

OBS_DIM = 7
ACTION_DIM = 2
_SUBSTEP = 0.25
_EDGE = 1e-9


@dataclass(frozen=True)
class LayoutInfo:
    """Layout enregistré.

    Champs:
      file: nom du fichier texte dans hlps/envs/layouts.
      eval_start: départ fixe utilisé à l'évaluation (centre d'une cellule libre).
      eval_goal: but fixe utilisé à l'évaluation.
    """
    file: str
    eval_start: tuple[float, float]
    eval_goal: tuple[float, float]


# Layouts → positions d'évaluation. Le but fixe du U-maze est l'analogue du but (0, 8) de l'Ant Maze.
LAYOUTS: dict[str, LayoutInfo] = {
    "u_maze": LayoutInfo(file="u_maze.txt", eval_start=(2.5, 2.5), eval_goal=(2.5, 9.5)),
    "four_rooms": LayoutInfo(file="four_rooms.txt", eval_start=(2.5, 2.5), eval_goal=(14.5, 14.5)),
    "open": LayoutInfo(file="open.txt", eval_start=(2.5, 2.5), eval_goal=(9.5, 9.5)),
}


@dataclass(frozen=True)
class Layout:
    name: str
    free: np.ndarray  # (height, width) bool, row 0 is y in [0, 1)
    eval_start: tuple[float, float] | None = None
    eval_goal: tuple[float, float] | None = None

    @property
    def width(self) -> int:
        return self.free.shape[1]

    @property
    def height(self) -> int:
        return self.free.shape[0]

    def is_free(self, pos: np.ndarray) -> bool:
        x, y = math.floor(pos[0]), math.floor(pos[1])
        return 0 <= x < self.width and 0 <= y < self.height and bool(self.free[y, x])

    def free_cells(self) -> np.ndarray:
        """(n, 2) array of (x, y) lower-left corners of free cells, in row-major order."""
        ys, xs = np.nonzero(self.free)
        return np.stack([xs, ys], axis=1).astype(float)


def parse_layout(text: str, name: str = "custom") -> Layout:
    rows = [line.rstrip("\n") for line in text.splitlines() if line.strip()]
    if not rows:
        raise ConfigError(f"layout '{name}' is empty")
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ConfigError(f"layout '{name}' row {i} has {len(row)} cells, expected {width}", line=i)
        bad = set(row) - {"#", "."}
        if bad:
            raise ConfigError(f"layout '{name}' row {i} has unknown cells {sorted(bad)}", line=i)
    free = np.array([[c == "." for c in row] for row in reversed(rows)], dtype=bool)
    if not free.any():
        raise ConfigError(f"layout '{name}' has no free cell")
    return Layout(name=name, free=free)


@lru_cache(maxsize=None)
def load_layout(name_or_path: str) -> Layout:
    """Registered layout by name, or a text-grid file path."""
    if name_or_path in LAYOUTS:
        info = LAYOUTS[name_or_path]
        text = resources.files("hlps.envs").joinpath("layouts", info.file).read_text()
        layout = parse_layout(text, name_or_path)
        return replace(layout, eval_start=info.eval_start, eval_goal=info.eval_goal)
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"unknown layout '{name_or_path}': not registered and no such file")
    return parse_layout(path.read_text(), path.stem)


@dataclass
class MazeConfig:
    layout: str = "u_maze"
    noise_sigma: float = 0.1
    reward_mode: str = "sparse"
    success_radius: float = 0.5
    horizon: int = 500
    goal_sampling: str = "random"
    start_sampling: str = "random"
    fixed_goal: tuple[float, float] | None = None
    fixed_start: tuple[float, float] | None = None
    v_max: float = 1.0
    dt: float = 0.5

    def __post_init__(self) -> None:
        if self.fixed_goal is not None:
            self.fixed_goal = tuple(float(v) for v in self.fixed_goal)
        if self.fixed_start is not None:
            self.fixed_start = tuple(float(v) for v in self.fixed_start)
        if self.noise_sigma < 0:
            raise ConfigError(f"env.noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.reward_mode not in ("dense", "sparse"):
            raise ConfigError(f"env.reward_mode must be 'dense' or 'sparse', got '{self.reward_mode}'")
        if self.success_radius <= 0:
            raise ConfigError(f"env.success_radius must be > 0, got {self.success_radius}")
        if self.horizon < 1:
            raise ConfigError(f"env.horizon must be >= 1, got {self.horizon}")
        for key in ("goal_sampling", "start_sampling"):
            if getattr(self, key) not in ("random", "fixed"):
                raise ConfigError(f"env.{key} must be 'random' or 'fixed', got '{getattr(self, key)}'")

    def goal(self, layout: Layout) -> tuple[float, float]:
        goal = self.fixed_goal or layout.eval_goal
        if goal is None:
            raise ConfigError(f"layout '{layout.name}' has no evaluation goal; set env.fixed_goal")
        return goal

    def start(self, layout: Layout) -> tuple[float, float]:
        start = self.fixed_start or layout.eval_start
        if start is None:
            raise ConfigError(f"layout '{layout.name}' has no evaluation start; set env.fixed_start")
        return start


@dataclass
class EnvState:
    position: np.ndarray
    velocity: np.ndarray
    t: int
    horizon: int
    goal: np.ndarray

    @property
    def remaining(self) -> float:
        return 1.0 - self.t / self.horizon

    def observation(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, [self.remaining], self.goal])

    def copy(self) -> "EnvState":
        return EnvState(self.position.copy(), self.velocity.copy(), self.t, self.horizon, self.goal.copy())


@dataclass
class StepResult:
    state: EnvState
    reward: float
    done: bool
    success: bool
    clamped: bool = False


def _sample_free_point(layout: Layout, rng: np.random.Generator) -> np.ndarray:
    cells = layout.free_cells()
    return cells[rng.integers(0, len(cells))] + rng.random(2)


def reset(config: MazeConfig, rng: np.random.Generator) -> EnvState:
    """Start and goal uniform over free space, or the fixed evaluation positions."""
    layout = load_layout(config.layout)
    if config.start_sampling == "fixed":
        start = np.array(config.start(layout), dtype=float)
    else:
        start = _sample_free_point(layout, rng)
    if config.goal_sampling == "fixed":
        goal = np.array(config.goal(layout), dtype=float)
    else:
        goal = _sample_free_point(layout, rng)
    for name, point in (("start", start), ("goal", goal)):
        if not layout.is_free(point):
            raise ConfigError(f"{name} {tuple(point)} lies outside the free space of '{layout.name}'")
    return EnvState(position=start, velocity=np.zeros(2), t=0, horizon=config.horizon, goal=goal)


def _move(layout: Layout, pos: np.ndarray, disp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a displacement in sub-steps, projecting onto walls axis by axis.

    Returns the new position and a per-axis flag telling whether a wall was hit.
    """
    pos = pos.copy()
    hit = np.zeros(2, dtype=bool)
    n_sub = max(1, math.ceil(float(np.abs(disp).max()) / _SUBSTEP))
    delta = disp / n_sub
    for _ in range(n_sub):
        for axis in (0, 1):
            if hit[axis] or delta[axis] == 0.0:
                continue
            cand = pos.copy()
            cand[axis] += delta[axis]
            if layout.is_free(cand):
                pos = cand
                continue
            hit[axis] = True
            boundary = math.floor(cand[axis])
            pos[axis] = boundary - _EDGE if delta[axis] > 0 else boundary + 1.0
    return pos, hit


def step(state: EnvState, action, config: MazeConfig, rng: np.random.Generator) -> StepResult:
    """Damped point-mass step: v ← 0.8v + 0.2·a·v_max, position += v·dt + N(0, σ²)."""
    layout = load_layout(config.layout)
    raw = np.asarray(action, dtype=float)
    a = np.clip(raw, -1.0, 1.0)
    clamped = bool((a != raw).any())
    velocity = 0.8 * state.velocity + 0.2 * a * config.v_max
    disp = velocity * config.dt
    if config.noise_sigma > 0:
        disp = disp + rng.normal(0.0, config.noise_sigma, size=2)
    position, hit = _move(layout, state.position, disp)
    velocity = np.where(hit, 0.0, velocity)
    t = state.t + 1
    new_state = EnvState(position=position, velocity=velocity, t=t, horizon=state.horizon, goal=state.goal.copy())
    distance = float(np.linalg.norm(position - state.goal))
    success = distance <= config.success_radius
    if config.reward_mode == "dense":
        reward = -distance
    else:
        reward = 1.0 if success else 0.0
    return StepResult(state=new_state, reward=reward, done=success or t >= config.horizon, success=success, clamped=clamped)


def success_metric(states: Sequence[EnvState], radius: float) -> bool:
    """True if any visited position lies within ``radius`` of the goal (episodes stop there)."""
    return any(float(np.linalg.norm(s.position - s.goal)) <= radius for s in states)


@dataclass
class PointMaze:
    """Stateful wrapper around ``reset``/``step`` owning its RNG stream."""
    config: MazeConfig
    rng: np.random.Generator
    state: EnvState | None = None
    clamped_actions: int = 0
    _warned: bool = field(default=False, repr=False)

    obs_dim = OBS_DIM
    action_dim = ACTION_DIM

    @property
    def layout(self) -> Layout:
        return load_layout(self.config.layout)

    def reset(self) -> np.ndarray:
        self.state = reset(self.config, self.rng)
        return self.state.observation()

    def step(self, action) -> StepResult:
        if self.state is None:
            raise RuntimeError("step() called before reset()")
        result = step(self.state, action, self.config, self.rng)
        if result.clamped:
            self.clamped_actions += 1
            if not self._warned:
                logger.warning("action %s outside [-1, 1]^2 was clamped", np.asarray(action).tolist())
                self._warned = True
        self.state = result.state
        return result


def print_all_layouts() -> None:
    print("Registered maze layouts:")
    max_len = max(len(name) for name in LAYOUTS)
    for name in sorted(LAYOUTS):
        layout = load_layout(name)
        info = LAYOUTS[name]
        print(f"  {name:<{max_len}} : {layout.width}x{layout.height}, "
              f"free cells = {int(layout.free.sum())}, eval start = {info.eval_start}, eval goal = {info.eval_goal}")
