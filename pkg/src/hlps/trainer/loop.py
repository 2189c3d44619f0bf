"""Hierarchical training loop.

Every environment step the low level acts on (s, g), the transition is stored with
its intrinsic reward −||φ(s') − g||, and (after warm-up) the low-level agent and the
encoder each take one gradient step. Every k steps the high level takes one step on
segment samples; every m steps the GP hyperparameters take one step on windows of T
segments. Evaluation runs every ``eval_every`` steps with the deterministic policy.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from pathlib import Path

import numpy as np
import torch
from tqdm import tqdm

from .._measure_time import measure_time
from ..autodiff import NamedAdam, as_tensor
from ..envs import ACTION_DIM, OBS_DIM, EnvState, PointMaze
from ..errors import AutodiffError, CheckpointError, GPError, StateSpaceError, TrainingError, TransferError
from ..gp import Belief, GPHyperparams
from ..objective import LossOptions, representation_update
from ..representation import RepresentationModel
from ..rl import ReplayBuffer, SacAgent, SacBatch, Transition, intrinsic_reward, relabel_intrinsic_rewards
from . import checkpoint as ckpt
from .config import TrainConfig
from .metrics import MetricsRow, MetricsWriter, UpdateCounters
from .policy import EvalResult, HierarchicalPolicy, dump_latent_trajectories, evaluate

logger = logging.getLogger(__name__)

# Named RNG streams: adding draws to one component never shifts another.
STREAMS = {"env": 0, "explore": 1, "buffer": 2, "low": 3, "high": 4, "repr": 5, "eval": 6, "dump": 7}

FINAL_CHECKPOINT = "final.ckpt"
DIAGNOSTIC_CHECKPOINT = "diagnostic.ckpt"

_TRANSFERRED_MODULES = ("model", "low.actor", "low.q1", "low.q2", "low.q1_target", "low.q2_target")


def numpy_stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, STREAMS[name], *extra]))


def torch_stream(seed: int, name: str) -> torch.Generator:
    state = np.random.SeedSequence([seed, STREAMS[name]]).generate_state(1)[0]
    return torch.Generator().manual_seed(int(state))


class Trainer:
    """Owns every piece of mutable training state for one seed."""

    def __init__(self, config: TrainConfig, out_dir: str | Path | None = None, progress: bool = False):
        self.config = c = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.progress = progress
        self.env = PointMaze(c.env, numpy_stream(c.seed, "env"))
        self.explore_rng = numpy_stream(c.seed, "explore")
        self.buffer_rng = numpy_stream(c.seed, "buffer")
        hp = GPHyperparams(c.gp_gamma2, c.gp_ell, c.gp_sigma2)
        self.model = RepresentationModel(
            OBS_DIM, c.latent_dim, c.encoder_hidden, c.representation, hp, generator=torch_stream(c.seed, "repr")
        )
        self.latent_bound = c.latent_bound_min
        self.low = SacAgent(OBS_DIM + c.latent_dim, ACTION_DIM, -1.0, 1.0, c.sac, torch_stream(c.seed, "low"))
        self.high = SacAgent(OBS_DIM, c.latent_dim, -self.latent_bound, self.latent_bound, c.sac, torch_stream(c.seed, "high"))
        self.buffer = ReplayBuffer(c.buffer_capacity, OBS_DIM, c.latent_dim, ACTION_DIM)
        self.encoder_opt = NamedAdam(self.model.encoder_parameters(), c.encoder_lr) if self.model.trainable else None
        self.hyper_opt = NamedAdam(self.model.hyper_parameters(), c.gp_lr) if self.model.trainable else None
        self.loss_options = LossOptions(variant=c.loss_variant, ratio_grad=c.ratio_grad, margin=c.margin)

        self.counters = UpdateCounters()
        self.t = 0
        self.episode = 0
        self.latent_max = 0.0
        self._repr_loss_sum = 0.0
        self._repr_loss_count = 0
        self.metrics: list[MetricsRow] = []
        self._writer: MetricsWriter | None = None
        self._clock_start = time.perf_counter()
        self._start_episode()

    def _start_episode(self) -> None:
        obs = self.env.reset()
        self.model.normalizer.update(as_tensor(obs))
        self.obs = obs
        self.g = np.zeros(self.config.latent_dim)
        self.episode_step = 0
        self.episode_return = 0.0
        self._restart_belief()

    def _restart_belief(self) -> None:
        self.belief = self.model.new_belief()
        z, self.belief = self.model.phi_online(self.belief, as_tensor(self.obs))
        self._track_latent(z)

    def _track_latent(self, z: torch.Tensor) -> None:
        self.latent_max = max(self.latent_max, float(z.abs().max()))

    def _refresh_latent_bound(self) -> None:
        """High-level action box [-L, L]^d with L = max(L_min, 2 · largest |z| seen so far)."""
        self.latent_bound = max(self.config.latent_bound_min, 2.0 * self.latent_max)
        self.high.set_action_bounds(-self.latent_bound, self.latent_bound)

    @property
    def learning(self) -> bool:
        return self.t >= self.config.warmup_steps

    def _update_low(self) -> None:
        batch = self.buffer.sample_uniform(self.config.sac.batch_size, self.buffer_rng)
        if batch is None:
            return
        reward = relabel_intrinsic_rewards(self.model, batch.s, batch.s_next, batch.g)
        self.low.update(
            SacBatch.from_arrays(
                np.concatenate([batch.s, batch.g], axis=1),
                batch.a,
                reward,
                np.concatenate([batch.s_next, batch.g_next], axis=1),
                batch.done,
            )
        )
        self.counters.low += 1

    def _update_representation(self, which: str) -> None:
        c = self.config
        optimizer = self.encoder_opt if which == "encoder" else self.hyper_opt
        if optimizer is None:
            return
        loss = representation_update(
            self.model,
            self.buffer,
            which,
            c.repr_batch_size if which == "encoder" else c.hyper_batch_size,
            optimizer,
            self.buffer_rng,
            k=c.k,
            T=c.T,
            options=self.loss_options,
        )
        if loss is None:
            return
        if which == "encoder":
            self.counters.encoder += 1
            self._repr_loss_sum += loss
            self._repr_loss_count += 1
        else:
            self.counters.hyper += 1

    def _update_high(self) -> None:
        seg = self.buffer.sample_segments(self.config.sac.batch_size, self.config.k, self.buffer_rng)
        if seg is None:
            return
        self.high.update(SacBatch.from_arrays(seg.s_start, seg.g, seg.reward, seg.s_end, seg.done))
        self.counters.high += 1

    def step(self) -> None:
        """One environment step and the updates scheduled on it."""
        c = self.config
        learning = self.learning
        if self.episode_step % c.k == 0:
            if learning:
                self.g = self.high.sample_action(self.obs)
            else:
                self.g = self.explore_rng.uniform(-self.latent_bound, self.latent_bound, size=c.latent_dim)
        if learning:
            action = self.low.sample_action(np.concatenate([self.obs, self.g]))
        else:
            action = self.explore_rng.uniform(-1.0, 1.0, size=ACTION_DIM)

        result = self.env.step(action)
        next_obs = result.state.observation()
        s_next = as_tensor(next_obs)
        self.model.normalizer.update(s_next)
        z_next, self.belief = self.model.phi_online(self.belief, s_next)
        self._track_latent(z_next)
        r_int = intrinsic_reward(z_next, as_tensor(self.g)).item()
        self.buffer.push(
            Transition(
                s=self.obs, g=self.g, a=action, r_env=result.reward, s_next=next_obs, g_next=self.g,
                done=result.success, episode=self.episode, step=self.episode_step, r_int=r_int,
            )
        )
        if learning:
            self._update_low()
            self._update_representation("encoder")

        self.t += 1
        self.episode_step += 1
        self.episode_return += result.reward
        self.obs = next_obs
        if learning and self.t % c.k == 0:
            self._update_high()
        if learning and self.t % c.m == 0:
            self._update_representation("hyperparams")

        if result.done:
            logger.debug("episode %d ended at step %d (success=%s, return=%.3f)",
                         self.episode, self.episode_step, result.success, self.episode_return)
            self.buffer.close_episode(self.episode)
            self.episode += 1
            self._start_episode()

        if self.t % c.eval_every == 0:
            self._log_evaluation()

    @measure_time(logger=logger.info)
    def train(self, steps: int | None = None) -> list[MetricsRow]:
        """Run ``steps`` more environment steps (default: up to ``config.total_steps``).

        Raises:
            TrainingError: a loss or gradient went non-finite; a diagnostic checkpoint is
                written to the run directory first.
        """
        target = self.config.total_steps if steps is None else self.t + steps
        self._open_writer()
        with tqdm(total=target, initial=self.t, desc="Training", unit=" steps", disable=not self.progress) as pbar:
            try:
                while self.t < target:
                    self.step()
                    pbar.update(1)
            except (TrainingError, AutodiffError, GPError, StateSpaceError) as exc:
                self._write_diagnostic(exc)
                if isinstance(exc, TrainingError):
                    raise
                raise TrainingError(f"training aborted at step {self.t}: {exc}") from exc
        if self.out_dir is not None:
            self.save(self.out_dir / FINAL_CHECKPOINT)
        logger.info("trained to step %d: %s", self.t, self.counters)
        return self.metrics

    def _open_writer(self) -> None:
        if self.out_dir is None or self._writer is not None:
            return
        self._writer = MetricsWriter(self.out_dir, resume=bool(self.metrics))

    def _write_diagnostic(self, exc: Exception) -> None:
        logger.error("non-finite training state at step %d: %s", self.t, exc)
        if self.out_dir is None:
            return
        try:
            path = self.save(self.out_dir / DIAGNOSTIC_CHECKPOINT)
            logger.error("diagnostic checkpoint written to %s", path)
        except (OSError, CheckpointError) as save_exc:
            logger.error("could not write diagnostic checkpoint: %s", save_exc)

    def eval_env_config(self):
        return dataclasses.replace(self.config.env, goal_sampling="fixed", start_sampling="fixed")

    def policy(self, deterministic: bool = True) -> HierarchicalPolicy:
        return HierarchicalPolicy(self.model, self.low, self.high, self.config.k, deterministic)

    def evaluate(self, episodes: int | None = None, record: bool = False) -> EvalResult:
        """Deterministic rollouts on the fixed evaluation task; draws only from the eval stream."""
        rng = numpy_stream(self.config.seed, "eval", self.t)
        with self.model.normalizer.freeze():
            return evaluate(self.policy(), self.eval_env_config(), episodes or self.config.eval_episodes, rng, record)

    def _log_evaluation(self) -> MetricsRow:
        self._refresh_latent_bound()
        result = self.evaluate()
        gamma2, ell, sigma2 = self.model.hp.values()
        repr_loss = self._repr_loss_sum / self._repr_loss_count if self._repr_loss_count else math.nan
        row = MetricsRow(
            step=self.t,
            success_rate=float(result.success_rate),
            mean_return=float(result.mean_return),
            repr_loss=float(repr_loss),
            gamma2=gamma2,
            ell=ell,
            sigma2=sigma2,
            updates=self.counters.total,
            wall_clock=time.perf_counter() - self._clock_start,
        )
        self._repr_loss_sum, self._repr_loss_count = 0.0, 0
        self.metrics.append(row)
        if self._writer is not None:
            self._writer.append(row)
        logger.info("step %d: success %.2f, return %.3f, repr loss %.4g, %r",
                    row.step, row.success_rate, row.mean_return, row.repr_loss, self.model.hp)
        return row

    def dump(self, path: str | Path, episodes: int = 1) -> int:
        rng = numpy_stream(self.config.seed, "dump", self.t)
        with self.model.normalizer.freeze():
            return dump_latent_trajectories(self.policy(), self.eval_env_config(), episodes, path, rng)

    def _modules(self) -> dict[str, torch.nn.Module]:
        modules = {"model": self.model}
        for level, agent in (("low", self.low), ("high", self.high)):
            modules.update({f"{level}.{name}": module for name, module in agent.modules().items()})
        return modules

    def _optimizers(self) -> dict[str, NamedAdam]:
        optimizers = {}
        for level, agent in (("low", self.low), ("high", self.high)):
            optimizers.update({f"{level}.{name}": opt for name, opt in agent.optimizers().items()})
        if self.encoder_opt is not None:
            optimizers["encoder_opt"] = self.encoder_opt
            optimizers["hyper_opt"] = self.hyper_opt
        return optimizers

    def state_dict(self) -> dict[str, ckpt.Segment]:
        segments: dict[str, ckpt.Segment] = {"config": ckpt.json_segment(self.config.to_dict())}
        for prefix, module in self._modules().items():
            segments.update(ckpt.module_segments(prefix, module))
        segments["low.log_alpha"] = self.low.log_alpha.detach().clone()
        segments["high.log_alpha"] = self.high.log_alpha.detach().clone()
        for prefix, optimizer in self._optimizers().items():
            segments.update(ckpt.optimizer_segments(prefix, optimizer))
        segments.update({f"buffer.{k}": torch.as_tensor(v) for k, v in self.buffer.state_dict().items()})

        for name, rng in (("env", self.env.rng), ("explore", self.explore_rng), ("buffer", self.buffer_rng)):
            segments[f"rng.{name}"] = ckpt.numpy_rng_state(rng)
        segments["rng.low"] = ckpt.torch_rng_state(self.low.generator)
        segments["rng.high"] = ckpt.torch_rng_state(self.high.generator)

        env_state = self.env.state
        segments["state.counters"] = torch.tensor(
            [self.t, self.episode, self.episode_step, *self.counters.as_list(), self.env.clamped_actions,
             self._repr_loss_count, env_state.t, env_state.horizon],
            dtype=torch.float64,
        )
        segments["state.floats"] = torch.tensor(
            [self.episode_return, self.latent_max, self.latent_bound, self._repr_loss_sum], dtype=torch.float64
        )
        segments["state.obs"] = as_tensor(self.obs)
        segments["state.g"] = as_tensor(self.g)
        segments["env.position"] = as_tensor(env_state.position)
        segments["env.velocity"] = as_tensor(env_state.velocity)
        segments["env.goal"] = as_tensor(env_state.goal)
        segments["belief.mu"] = self.belief.mu.clone()
        segments["belief.Sigma"] = self.belief.Sigma.clone()
        segments["belief.last_state"] = self.belief.last_state.clone()
        segments["metrics"] = torch.tensor(
            [[getattr(row, f.name) for f in dataclasses.fields(MetricsRow)] for row in self.metrics], dtype=torch.float64
        ).reshape(-1, len(dataclasses.fields(MetricsRow)))
        return segments

    def load_state_dict(self, segments: dict[str, ckpt.Segment]) -> None:
        for prefix, module in self._modules().items():
            ckpt.load_module(prefix, module, segments)
        with torch.no_grad():
            self.low.log_alpha.copy_(ckpt.require(segments, "low.log_alpha"))
            self.high.log_alpha.copy_(ckpt.require(segments, "high.log_alpha"))
        for prefix, optimizer in self._optimizers().items():
            ckpt.load_optimizer(prefix, optimizer, segments)
        self.buffer.load_state_dict({k: v.numpy() for k, v in ckpt.with_prefix(segments, "buffer").items()})

        for name, rng in (("env", self.env.rng), ("explore", self.explore_rng), ("buffer", self.buffer_rng)):
            ckpt.restore_numpy_rng(rng, ckpt.require(segments, f"rng.{name}"))
        ckpt.restore_torch_rng(self.low.generator, ckpt.require(segments, "rng.low"))
        ckpt.restore_torch_rng(self.high.generator, ckpt.require(segments, "rng.high"))

        counters = [int(v) for v in ckpt.require(segments, "state.counters").tolist()]
        (self.t, self.episode, self.episode_step, low, high, encoder, hyper,
         self.env.clamped_actions, self._repr_loss_count, env_t, horizon) = counters
        self.counters = UpdateCounters(low=low, high=high, encoder=encoder, hyper=hyper)
        self.episode_return, self.latent_max, self.latent_bound, self._repr_loss_sum = (
            ckpt.require(segments, "state.floats").tolist()
        )
        self.high.set_action_bounds(-self.latent_bound, self.latent_bound)
        self.obs = ckpt.require(segments, "state.obs").numpy().copy()
        self.g = ckpt.require(segments, "state.g").numpy().copy()
        self.env.state = EnvState(
            position=ckpt.require(segments, "env.position").numpy().copy(),
            velocity=ckpt.require(segments, "env.velocity").numpy().copy(),
            t=env_t,
            horizon=horizon,
            goal=ckpt.require(segments, "env.goal").numpy().copy(),
        )
        self.belief = Belief(
            mu=ckpt.require(segments, "belief.mu").clone(),
            Sigma=ckpt.require(segments, "belief.Sigma").clone(),
            last_state=ckpt.require(segments, "belief.last_state").clone(),
        )
        names = [f.name for f in dataclasses.fields(MetricsRow)]
        self.metrics = [
            MetricsRow(**{n: (int(v) if n in ("step", "updates") else float(v)) for n, v in zip(names, row)})
            for row in ckpt.require(segments, "metrics").tolist()
        ]

    def save(self, path: str | Path) -> Path:
        path = ckpt.write_checkpoint(path, self.state_dict())
        logger.info("checkpoint saved to %s (step %d)", path, self.t)
        return path

    @classmethod
    def load(cls, path: str | Path, config: TrainConfig | None = None, out_dir: str | Path | None = None,
             progress: bool = False) -> "Trainer":
        """Restore a trainer; the stored config is used unless ``config`` is given."""
        segments = ckpt.read_checkpoint(path)
        if config is None:
            config = TrainConfig.from_dict(ckpt.read_json_segment(segments, "config"))
        trainer = cls(config, out_dir=out_dir, progress=progress)
        trainer.load_state_dict(segments)
        return trainer


def stored_config(path: str | Path) -> TrainConfig:
    return TrainConfig.from_dict(ckpt.read_json_segment(ckpt.read_checkpoint(path), "config"))


def transfer_init(target_config: TrainConfig, source: str | Path, out_dir: str | Path | None = None,
                  progress: bool = False) -> Trainer:
    """Fresh trainer for ``target_config`` whose representation and low-level agent come from ``source``.

    The high-level agent, optimizers, replay buffer and counters start fresh.

    Raises:
        TransferError: the source was trained with other latent/network dimensions.
        CheckpointError: unreadable source checkpoint.
    """
    segments = ckpt.read_checkpoint(source)
    source_config = TrainConfig.from_dict(ckpt.read_json_segment(segments, "config"))
    for name, src, dst in (
        ("latent_dim", source_config.latent_dim, target_config.latent_dim),
        ("encoder_hidden", source_config.encoder_hidden, target_config.encoder_hidden),
        ("sac.hidden", source_config.sac.hidden, target_config.sac.hidden),
    ):
        if src != dst:
            raise TransferError(f"{name} differs between source ({src}) and target ({dst})")
    trainer = Trainer(target_config, out_dir=out_dir, progress=progress)
    modules = trainer._modules()
    for prefix in _TRANSFERRED_MODULES:
        try:
            ckpt.load_module(prefix, modules[prefix], segments)
        except CheckpointError as exc:
            raise TransferError(str(exc)) from None
    with torch.no_grad():
        trainer.low.log_alpha.copy_(ckpt.require(segments, "low.log_alpha"))
    trainer._restart_belief()
    logger.info("transferred representation and low-level agent from %s", source)
    return trainer
