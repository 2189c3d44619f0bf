"""FIFO replay buffer with transition, triplet, segment and window sampling.

Transitions are stored in push order in preallocated numpy arrays indexed by a
global counter modulo the capacity. Episodes are contiguous in that order, so
"s_{i+k}" of transition i is the next-state of transition i+k−1 of the same
episode, truncated at the episode's last transition.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError

logger = logging.getLogger(__name__)

_MAX_REJECTION_ROUNDS = 1000


@dataclass
class Transition:
    """One environment step as seen by both levels."""
    s: np.ndarray
    g: np.ndarray
    a: np.ndarray
    r_env: float
    s_next: np.ndarray
    g_next: np.ndarray
    done: bool
    episode: int
    step: int
    r_int: float = 0.0


@dataclass
class TransitionBatch:
    s: np.ndarray
    g: np.ndarray
    a: np.ndarray
    r_env: np.ndarray
    r_int: np.ndarray
    s_next: np.ndarray
    g_next: np.ndarray
    done: np.ndarray


@dataclass
class TripletSample:
    states: np.ndarray  # (n, 3, ds)
    episodes: np.ndarray  # (n, 3)


@dataclass
class WindowSample:
    states: np.ndarray  # (n, 2T+1, ds)
    episodes: np.ndarray  # (n, 2T+1)


@dataclass
class SegmentBatch:
    """High-level transitions: (s_start, g, Σ r_env over the segment, s_end, done)."""
    s_start: np.ndarray
    g: np.ndarray
    reward: np.ndarray
    s_end: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    _FIELDS = ("s", "g", "a", "r_env", "r_int", "s_next", "g_next", "done", "episode", "step", "episode_end")

    def __init__(self, capacity: int, state_dim: int, latent_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.state_dim, self.latent_dim, self.action_dim = state_dim, latent_dim, action_dim
        self.s = np.zeros((capacity, state_dim))
        self.g = np.zeros((capacity, latent_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r_env = np.zeros(capacity)
        self.r_int = np.zeros(capacity)
        self.s_next = np.zeros((capacity, state_dim))
        self.g_next = np.zeros((capacity, latent_dim))
        self.done = np.zeros(capacity)
        self.episode = np.zeros(capacity, dtype=np.int64)
        self.step = np.zeros(capacity, dtype=np.int64)
        # global index of the episode's last transition, -1 while the episode is still running
        self.episode_end = np.full(capacity, -1, dtype=np.int64)
        self.total = 0
        self._open_episodes: dict[int, int] = {}

    def __len__(self) -> int:
        return min(self.total, self.capacity)

    @property
    def oldest(self) -> int:
        return self.total - len(self)

    @property
    def newest(self) -> int:
        return self.total - 1

    def push(self, tr: Transition) -> None:
        values = (tr.s, tr.g, tr.a, tr.s_next, tr.g_next, np.asarray([tr.r_env, tr.r_int], dtype=float))
        if not all(np.isfinite(np.asarray(v, dtype=float)).all() for v in values):
            raise TrainingError(f"non-finite transition in episode {tr.episode}, step {tr.step}")
        slot = self.total % self.capacity
        self.s[slot], self.g[slot], self.a[slot] = tr.s, tr.g, tr.a
        self.r_env[slot], self.r_int[slot] = tr.r_env, tr.r_int
        self.s_next[slot], self.g_next[slot] = tr.s_next, tr.g_next
        self.done[slot] = float(tr.done)
        self.episode[slot], self.step[slot] = tr.episode, tr.step
        self.episode_end[slot] = -1
        self._open_episodes.setdefault(tr.episode, self.total)
        self.total += 1

    def close_episode(self, episode: int) -> None:
        """Mark ``episode`` finished; its last pushed transition becomes the episode end."""
        first = self._open_episodes.pop(episode, None)
        if first is None:
            return
        last = self.newest
        idx = np.arange(max(first, self.oldest), last + 1) % self.capacity
        self.episode_end[idx] = last

    def _slots(self, g: np.ndarray) -> np.ndarray:
        return g % self.capacity

    def _ends(self, g: np.ndarray) -> np.ndarray:
        end = self.episode_end[self._slots(g)]
        return np.where(end >= 0, end, self.newest)

    def _reachable(self, g: np.ndarray, span: int) -> np.ndarray:
        """True where transition g+span−1 exists or g's episode is closed."""
        return (self.episode_end[self._slots(g)] >= 0) | (g + span - 1 <= self.newest)

    def _draw(self, n: int, span: int, rng: np.random.Generator) -> np.ndarray | None:
        """Uniform draw over transitions whose span is reachable (rejection sampling)."""
        if len(self) == 0:
            return None
        tail = np.arange(max(self.oldest, self.total - span + 1), self.total)
        if len(self) - int((~self._reachable(tail, span)).sum()) < 1:
            return None
        g = rng.integers(self.oldest, self.total, size=n)
        for _ in range(_MAX_REJECTION_ROUNDS):
            bad = ~self._reachable(g, span)
            if not bad.any():
                return g
            g[bad] = rng.integers(self.oldest, self.total, size=int(bad.sum()))
        return None

    def _segment_starts(self, k: int, span: int) -> np.ndarray:
        g = np.arange(self.oldest, self.total)
        starts = g[self.step[self._slots(g)] % k == 0]
        return starts[self._reachable(starts, span)]

    def sample_uniform(self, n: int, rng: np.random.Generator) -> TransitionBatch | None:
        if len(self) == 0:
            return None
        idx = self._slots(rng.integers(self.oldest, self.total, size=n))
        return TransitionBatch(
            s=self.s[idx], g=self.g[idx], a=self.a[idx], r_env=self.r_env[idx], r_int=self.r_int[idx],
            s_next=self.s_next[idx], g_next=self.g_next[idx], done=self.done[idx],
        )

    def sample_triplets(self, n: int, k: int, rng: np.random.Generator) -> TripletSample | None:
        g = self._draw(n, k, rng)
        if g is None:
            return None
        j = np.minimum(g + k - 1, self._ends(g))
        si, sj = self._slots(g), self._slots(j)
        states = np.stack([self.s[si], self.s_next[si], self.s_next[sj]], axis=1)
        episodes = np.stack([self.episode[si], self.episode[si], self.episode[sj]], axis=1)
        return TripletSample(states=states, episodes=episodes)

    def sample_segments(self, n: int, k: int, rng: np.random.Generator) -> SegmentBatch | None:
        starts = self._segment_starts(k, k)
        if starts.size == 0:
            return None
        g = starts[rng.integers(0, starts.size, size=n)]
        j = np.minimum(g + k - 1, self._ends(g))
        reward = np.array([self.r_env[self._slots(np.arange(a, b + 1))].sum() for a, b in zip(g, j)])
        si, sj = self._slots(g), self._slots(j)
        return SegmentBatch(
            s_start=self.s[si], g=self.g[si], reward=reward, s_end=self.s_next[sj], done=self.done[sj],
        )

    def sample_windows(self, n: int, k: int, T: int, rng: np.random.Generator) -> WindowSample | None:
        """Windows of T consecutive segments as 2T+1 support states (see objective.window_loss).

        Only the first segment has to be reachable; later segments are cut at the episode's
        last transition, or at the newest one while the episode is still running.
        """
        starts = self._segment_starts(k, k)
        if starts.size == 0:
            return None
        g = starts[rng.integers(0, starts.size, size=n)]
        end = self._ends(g)
        columns, episodes = [], []
        for seg in range(T):
            at = np.minimum(g + seg * k, end)
            past_end = g + seg * k > end
            slots = self._slots(at)
            columns.append(np.where(past_end[:, None], self.s_next[slots], self.s[slots]))
            columns.append(self.s_next[slots])
            episodes += [self.episode[slots]] * 2
        last = self._slots(np.minimum(g + T * k - 1, end))
        columns.append(self.s_next[last])
        episodes.append(self.episode[last])
        return WindowSample(states=np.stack(columns, axis=1), episodes=np.stack(episodes, axis=1))

    def segment_reward(self, start: int, k: int) -> float:
        """Σ r_env over the segment starting at global index ``start`` (replay oracle)."""
        end = min(start + k - 1, int(self._ends(np.array([start]))[0]))
        return float(self.r_env[self._slots(np.arange(start, end + 1))].sum())

    def state_dict(self) -> dict[str, np.ndarray]:
        order = self._slots(np.arange(self.oldest, self.total))
        state = {name: getattr(self, name)[order].astype(float) for name in self._FIELDS}
        open_eps = sorted(self._open_episodes.items())
        state["open_episodes"] = np.array(open_eps, dtype=float).reshape(-1, 2)
        state["counters"] = np.array([self.total, self.capacity], dtype=float)
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        total, capacity = (int(v) for v in state["counters"])
        if capacity != self.capacity:
            raise TrainingError(f"buffer capacity mismatch: checkpoint {capacity}, config {self.capacity}")
        self.total = total
        order = self._slots(np.arange(self.oldest, self.total))
        for name in self._FIELDS:
            target = getattr(self, name)
            target[order] = state[name].astype(target.dtype)
        self._open_episodes = {int(e): int(f) for e, f in state["open_episodes"]}
