"""Soft actor-critic agent used at both levels of the hierarchy.

Actor and critics are three fully-connected layers (hidden width 256, ReLU). The
actor outputs a Gaussian in pre-squash space; actions are tanh-squashed and scaled
to the level's action box. Temperature α is learned toward entropy −|A|.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..autodiff import DTYPE, NamedAdam, as_tensor, mlp, softplus
from ..errors import TrainingError

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class SacConfig:
    hidden: int = 256
    lr: float = 2e-4
    gamma: float = 0.99
    tau: float = 0.005
    reward_scale: float = 0.1
    alpha_init: float = 0.2
    learn_alpha: bool = True
    batch_size: int = 128
    log_std_min: float = -20.0
    log_std_max: float = 2.0


@dataclass
class SacBatch:
    obs: torch.Tensor
    action: torch.Tensor
    reward: torch.Tensor
    next_obs: torch.Tensor
    done: torch.Tensor

    @classmethod
    def from_arrays(cls, obs, action, reward, next_obs, done) -> "SacBatch":
        return cls(*(as_tensor(np.asarray(x)) for x in (obs, action, reward, next_obs, done)))


@dataclass
class SacLosses:
    critic_loss: float
    actor_loss: float
    alpha: float


class GaussianActor(nn.Module):
    def __init__(self, obs_dim: int, action_dim: int, hidden: int, generator: torch.Generator,
                 log_std_min: float = -20.0, log_std_max: float = 2.0):
        super().__init__()
        self.net = mlp([obs_dim, hidden, hidden, 2 * action_dim], generator)
        self.action_dim = action_dim
        self.log_std_min, self.log_std_max = log_std_min, log_std_max

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mean, log_std = self.net(obs).split(self.action_dim, dim=-1)
        return mean, log_std.clamp(self.log_std_min, self.log_std_max)


class QNetwork(nn.Module):
    def __init__(self, obs_dim: int, action_dim: int, hidden: int, generator: torch.Generator):
        super().__init__()
        self.net = mlp([obs_dim + action_dim, hidden, hidden, 1], generator)

    def forward(self, obs: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([obs, action], dim=-1)).squeeze(-1)


def _apply_gradients(loss: torch.Tensor, optimizer: NamedAdam) -> None:
    """Step ``optimizer`` on the gradient of ``loss`` w.r.t. its own parameters only."""
    params = optimizer.parameters()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    for p, g in zip(params, grads):
        p.grad = torch.zeros_like(p) if g is None else g
    optimizer.step()


class SacAgent:
    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        action_low,
        action_high,
        config: SacConfig | None = None,
        generator: torch.Generator | None = None,
    ):
        self.config = config or SacConfig()
        self.obs_dim, self.action_dim = obs_dim, action_dim
        self.generator = generator if generator is not None else torch.Generator().manual_seed(0)
        c = self.config
        self.actor = GaussianActor(obs_dim, action_dim, c.hidden, self.generator, c.log_std_min, c.log_std_max)
        self.q1 = QNetwork(obs_dim, action_dim, c.hidden, self.generator)
        self.q2 = QNetwork(obs_dim, action_dim, c.hidden, self.generator)
        self.q1_target = copy.deepcopy(self.q1).requires_grad_(False)
        self.q2_target = copy.deepcopy(self.q2).requires_grad_(False)
        self.log_alpha = nn.Parameter(torch.tensor(math.log(c.alpha_init), dtype=DTYPE))
        self.target_entropy = -float(action_dim)
        self.actor_opt = NamedAdam(self.actor.named_parameters(prefix="actor"), c.lr)
        self.critic_opt = NamedAdam(
            [*self.q1.named_parameters(prefix="q1"), *self.q2.named_parameters(prefix="q2")], c.lr
        )
        self.alpha_opt = NamedAdam([("log_alpha", self.log_alpha)], c.lr)
        self.set_action_bounds(action_low, action_high)

    def set_action_bounds(self, low, high) -> None:
        low = as_tensor(np.broadcast_to(np.asarray(low, dtype=float), (self.action_dim,)).copy())
        high = as_tensor(np.broadcast_to(np.asarray(high, dtype=float), (self.action_dim,)).copy())
        if not (high > low).all():
            raise ValueError("action upper bounds must exceed lower bounds")
        self.action_scale = (high - low) / 2.0
        self.action_bias = (high + low) / 2.0

    @property
    def alpha(self) -> torch.Tensor:
        return self.log_alpha.exp()

    def modules(self) -> dict[str, nn.Module]:
        return {"actor": self.actor, "q1": self.q1, "q2": self.q2, "q1_target": self.q1_target, "q2_target": self.q2_target}

    def optimizers(self) -> dict[str, NamedAdam]:
        return {"actor_opt": self.actor_opt, "critic_opt": self.critic_opt, "alpha_opt": self.alpha_opt}

    def _noise(self, shape) -> torch.Tensor:
        return torch.randn(shape, generator=self.generator, dtype=DTYPE)

    def policy(self, obs: torch.Tensor, noise: torch.Tensor | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        """Reparameterised sample and its log-density under the squashed, scaled Gaussian."""
        mean, log_std = self.actor(obs)
        if noise is None:
            noise = self._noise(mean.shape)
        u = mean + log_std.exp() * noise
        log_prob = (-0.5 * noise**2 - log_std - 0.5 * _LOG_2PI).sum(-1)
        # log|d action / du| = log scale + log(1 − tanh²u), the latter written as 2(log 2 − u − softplus(−2u))
        log_det = torch.log(self.action_scale) + 2.0 * (math.log(2.0) - u - softplus(-2.0 * u))
        return torch.tanh(u) * self.action_scale + self.action_bias, log_prob - log_det.sum(-1)

    def log_prob(self, obs: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        """Density of given actions (inverse of the squash)."""
        y = ((action - self.action_bias) / self.action_scale).clamp(-1 + 1e-12, 1 - 1e-12)
        u = torch.atanh(y)
        mean, log_std = self.actor(obs)
        z = (u - mean) / log_std.exp()
        log_prob = (-0.5 * z**2 - log_std - 0.5 * _LOG_2PI).sum(-1)
        log_det = torch.log(self.action_scale) + 2.0 * (math.log(2.0) - u - softplus(-2.0 * u))
        return log_prob - log_det.sum(-1)

    @torch.no_grad()
    def sample_action(self, obs, deterministic: bool = False) -> np.ndarray:
        obs_t = as_tensor(np.asarray(obs, dtype=float))[None]
        if deterministic:
            mean, _ = self.actor(obs_t)
            action = torch.tanh(mean) * self.action_scale + self.action_bias
        else:
            action, _ = self.policy(obs_t)
        return action[0].numpy().copy()

    def critic_target(self, batch: SacBatch, next_noise: torch.Tensor | None = None) -> torch.Tensor:
        """reward_scale·r + γ(1 − done)(min target Q − α log π) at the next observation."""
        c = self.config
        with torch.no_grad():
            next_action, next_log_prob = self.policy(batch.next_obs, next_noise)
            next_q = torch.min(self.q1_target(batch.next_obs, next_action), self.q2_target(batch.next_obs, next_action))
            return c.reward_scale * batch.reward + c.gamma * (1.0 - batch.done) * (next_q - self.alpha * next_log_prob)

    def critic_loss(self, batch: SacBatch, next_noise: torch.Tensor | None = None) -> torch.Tensor:
        target = self.critic_target(batch, next_noise)
        q1, q2 = self.q1(batch.obs, batch.action), self.q2(batch.obs, batch.action)
        return ((q1 - target) ** 2).mean() + ((q2 - target) ** 2).mean()

    def actor_loss(self, batch: SacBatch, noise: torch.Tensor | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        action, log_prob = self.policy(batch.obs, noise)
        q = torch.min(self.q1(batch.obs, action), self.q2(batch.obs, action))
        return (self.alpha.detach() * log_prob - q).mean(), log_prob

    def alpha_loss(self, log_prob: torch.Tensor) -> torch.Tensor:
        return -(self.log_alpha * (log_prob.detach() + self.target_entropy)).mean()

    @torch.no_grad()
    def soft_update_targets(self) -> None:
        tau = self.config.tau
        for live, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            for p, p_t in zip(live.parameters(), target.parameters()):
                p_t.mul_(1.0 - tau).add_(tau * p)

    def update(self, batch: SacBatch) -> SacLosses:
        critic_loss = self.critic_loss(batch)
        if not torch.isfinite(critic_loss):
            raise TrainingError("non-finite critic loss")
        _apply_gradients(critic_loss, self.critic_opt)

        actor_loss, log_prob = self.actor_loss(batch)
        if not torch.isfinite(actor_loss):
            raise TrainingError("non-finite actor loss")
        _apply_gradients(actor_loss, self.actor_opt)

        if self.config.learn_alpha:
            alpha_loss = self.alpha_loss(log_prob)
            if not torch.isfinite(alpha_loss):
                raise TrainingError("non-finite temperature loss")
            _apply_gradients(alpha_loss, self.alpha_opt)

        self.soft_update_targets()
        return SacLosses(critic_loss.item(), actor_loss.item(), self.alpha.item())
