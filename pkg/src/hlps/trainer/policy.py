"""Rollout policies, evaluation and latent-trajectory dumps."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .._measure_time import measure_time
from ..autodiff import as_tensor
from ..envs import EnvState, MazeConfig, PointMaze, success_metric

logger = logging.getLogger(__name__)

DUMP_COLUMNS = ("episode", "step", "s", "z", "z_var", "g")


class Policy(Protocol):
    def reset(self, obs: np.ndarray) -> None: ...

    def act(self, obs: np.ndarray) -> np.ndarray: ...

    def observe(self, obs: np.ndarray) -> None: ...


class HierarchicalPolicy:
    """Two-level policy: the high level emits a latent subgoal every ``k`` steps, the
    low level acts on (s, g). φ(s) is tracked online with the episode's filter.
    """

    def __init__(self, model, low, high, k: int, deterministic: bool = True):
        self.model, self.low, self.high = model, low, high
        self.k = k
        self.deterministic = deterministic
        self.belief = None
        self.z = None
        self.g = None
        self.t = 0
        self._subgoal_step = -1

    def reset(self, obs: np.ndarray) -> None:
        self.belief = self.model.new_belief()
        self.t = 0
        self._subgoal_step = -1
        self.observe(obs)

    def observe(self, obs: np.ndarray) -> None:
        z, self.belief = self.model.phi_online(self.belief, as_tensor(obs))
        self.z = z.numpy().copy()

    @property
    def z_var(self) -> float:
        return self.belief.variance

    def subgoal(self, obs: np.ndarray) -> np.ndarray:
        """Subgoal active at the current step; a new one is drawn once per k steps."""
        if self.t % self.k == 0 and self._subgoal_step != self.t:
            self.g = self.high.sample_action(obs, self.deterministic)
            self._subgoal_step = self.t
        return self.g

    def act(self, obs: np.ndarray) -> np.ndarray:
        g = self.subgoal(obs)
        self.t += 1
        return self.low.sample_action(np.concatenate([obs, g]), self.deterministic)


class StraightLinePolicy:
    """Scripted controller heading straight for the goal (open layouts only)."""

    def __init__(self, gain: float = 1.0):
        self.gain = gain

    def reset(self, obs: np.ndarray) -> None:
        pass

    def observe(self, obs: np.ndarray) -> None:
        pass

    def act(self, obs: np.ndarray) -> np.ndarray:
        return np.clip(self.gain * (obs[5:7] - obs[0:2]), -1.0, 1.0)


class RandomPolicy:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def reset(self, obs: np.ndarray) -> None:
        pass

    def observe(self, obs: np.ndarray) -> None:
        pass

    def act(self, obs: np.ndarray) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, size=2)


@dataclass
class EvalResult:
    """Résultat d'une évaluation.

    Champs:
      success_rate: succès / épisodes.
      mean_return: retour externe moyen.
      successes: drapeau de succès par épisode.
      lengths: longueur de chaque épisode.
      trajectories: états visités par épisode, remplis seulement si ``record=True``.
    """
    success_rate: float
    mean_return: float
    successes: list[bool]
    lengths: list[int]
    trajectories: list[list[EnvState]] = field(default_factory=list, repr=False)


def rollout(policy: Policy, env: PointMaze, on_step=None) -> tuple[list[EnvState], float, bool]:
    """One episode; ``on_step(t, obs, policy)`` is called before each action."""
    obs = env.reset()
    policy.reset(obs)
    states = [env.state.copy()]
    total, success, t = 0.0, False, 0
    while True:
        if on_step is not None:
            on_step(t, obs, policy)
        result = env.step(policy.act(obs))
        obs = result.state.observation()
        policy.observe(obs)
        states.append(result.state.copy())
        total += result.reward
        success = success or result.success
        t += 1
        if result.done:
            return states, total, success


@measure_time(logger=logger.debug)
def evaluate(policy: Policy, env_config: MazeConfig, episodes: int, rng: np.random.Generator, record: bool = False) -> EvalResult:
    """Roll out ``episodes`` episodes and report successes over episodes."""
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    env = PointMaze(env_config, rng)
    successes, returns, lengths, trajectories = [], [], [], []
    for _ in range(episodes):
        states, total, success = rollout(policy, env)
        if success != success_metric(states, env_config.success_radius):
            logger.warning("per-step success flags disagree with the trajectory recount")
        successes.append(success)
        returns.append(total)
        lengths.append(len(states) - 1)
        if record:
            trajectories.append(states)
    return EvalResult(
        success_rate=sum(successes) / episodes,
        mean_return=float(np.mean(returns)),
        successes=successes,
        lengths=lengths,
        trajectories=trajectories,
    )


def dump_latent_trajectories(
    policy: HierarchicalPolicy,
    env_config: MazeConfig,
    episodes: int,
    path: str | Path,
    rng: np.random.Generator,
) -> int:
    """Write one JSON line per step: (episode, step, s, z, z_var, g) for each acting state.

    Returns:
        The number of rows written, which is the sum of the episode lengths.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    env = PointMaze(env_config, rng)
    rows = 0
    with path.open("w") as fh:
        for episode in range(episodes):

            def write_row(t, obs, policy, episode=episode):
                row = {
                    "episode": episode,
                    "step": t,
                    "s": obs.tolist(),
                    "z": policy.z.tolist(),
                    "z_var": policy.z_var,
                    "g": np.asarray(policy.subgoal(obs)).tolist(),
                }
                fh.write(json.dumps(row) + "\n")

            rollout(policy, env, on_step=write_row)
            rows += env.state.t
    logger.info("wrote %d latent rows to %s", rows, path)
    return rows
