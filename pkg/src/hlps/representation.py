"""Subgoal representation φ(s): encoder network followed by the latent GP layer.

Training goes through ``phi_batch`` (batch posterior over a support window);
rollouts and collection-time intrinsic rewards go through ``phi_online``
(state-space filter, constant memory per step).
"""

from __future__ import annotations

import logging
import math
from contextlib import contextmanager

import torch
from torch import nn

from .autodiff import DTYPE, mlp
from .errors import RepresentationError
from .gp import Belief, GPHyperparams, SupportWindow, advance, batch_posterior, batch_posterior_many, initial_belief

logger = logging.getLogger(__name__)

REPRESENTATION_VARIANTS = ("hlps", "random_projection", "frozen")


class RunningNormalizer(nn.Module):
    """Running mean/std of raw states (parallel Welford update), frozen at evaluation."""

    def __init__(self, dim: int, eps: float = 1e-8):
        super().__init__()
        self.eps = eps
        self.frozen = False
        self.register_buffer("count", torch.zeros((), dtype=DTYPE))
        self.register_buffer("mean", torch.zeros(dim, dtype=DTYPE))
        self.register_buffer("m2", torch.zeros(dim, dtype=DTYPE))

    @torch.no_grad()
    def update(self, x: torch.Tensor) -> None:
        if self.frozen:
            return
        x = x.reshape(-1, self.mean.shape[0])
        n_b = x.shape[0]
        mean_b = x.mean(dim=0)
        m2_b = ((x - mean_b) ** 2).sum(dim=0)
        total = self.count + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / total
        self.m2 += m2_b + delta**2 * self.count * n_b / total
        self.count.fill_(total.item())

    @contextmanager
    def freeze(self):
        """Ignore ``update`` calls inside the block."""
        previous, self.frozen = self.frozen, True
        try:
            yield self
        finally:
            self.frozen = previous

    @property
    def std(self) -> torch.Tensor:
        if self.count.item() < 2:
            return torch.ones_like(self.mean)
        return torch.sqrt(self.m2 / self.count + self.eps)

    def normalize(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.mean) / self.std


class Encoder(nn.Module):
    """One hidden ReLU layer (width 100 by default) mapping ds -> d."""

    def __init__(self, state_dim: int, latent_dim: int, hidden: int, generator: torch.Generator):
        super().__init__()
        self.net = mlp([state_dim, hidden, latent_dim], generator)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class RepresentationModel(nn.Module):
    """Encoder + GP hyperparameters (+ observation normaliser).

    Variants:
      hlps: encoder and GP layer, both trained with the representation objective.
      frozen: same architecture, never updated.
      random_projection: fixed random linear map of the normalised state, no GP layer.
    """

    def __init__(
        self,
        state_dim: int,
        latent_dim: int = 2,
        hidden: int = 100,
        variant: str = "hlps",
        hp: GPHyperparams | None = None,
        generator: torch.Generator | None = None,
    ):
        super().__init__()
        if variant not in REPRESENTATION_VARIANTS:
            raise RepresentationError(f"unknown representation variant '{variant}'")
        generator = generator if generator is not None else torch.Generator().manual_seed(0)
        self.state_dim = state_dim
        self.latent_dim = latent_dim
        self.variant = variant
        self.normalizer = RunningNormalizer(state_dim)
        self.encoder = Encoder(state_dim, latent_dim, hidden, generator)
        self.hp = hp if hp is not None else GPHyperparams()
        projection = torch.randn(latent_dim, state_dim, generator=generator, dtype=DTYPE) / math.sqrt(state_dim)
        self.register_buffer("projection", projection)
        if not self.trainable:
            self.requires_grad_(False)

    @property
    def trainable(self) -> bool:
        return self.variant == "hlps"

    @property
    def uses_gp(self) -> bool:
        return self.variant != "random_projection"

    def encode(self, s: torch.Tensor) -> torch.Tensor:
        """Intermediate latent f for one state (ds,) or a stack (..., ds)."""
        if s.shape[-1] != self.state_dim:
            raise RepresentationError(f"state has dimension {s.shape[-1]}, model expects {self.state_dim}")
        x = self.normalizer.normalize(s)
        if not self.uses_gp:
            return x @ self.projection.T
        return self.encoder(x)

    def new_belief(self) -> Belief:
        return initial_belief(self.hp, self.latent_dim)

    @torch.no_grad()
    def phi_online(self, belief: Belief, s: torch.Tensor) -> tuple[torch.Tensor, Belief]:
        """Advance the episode's filter with state ``s`` and return (z, belief')."""
        f = self.encode(s)
        if not self.uses_gp:
            belief = belief.clone()
            belief.last_state = s.detach().clone()
            return f, belief
        belief = advance(belief, s, f, self.hp)
        return belief.mean.clone(), belief

    def phi_batch(self, states: torch.Tensor) -> torch.Tensor:
        """Posterior means Z for one window (N, ds) or a stack of windows (B, N, ds)."""
        F = self.encode(states)
        if not self.uses_gp:
            return F
        if states.ndim == 2:
            return batch_posterior(SupportWindow(states=states, F=F), self.hp).Z_mean
        return batch_posterior_many(states, F, self.hp).Z_mean

    def encoder_parameters(self):
        return [(f"encoder.{n}", p) for n, p in self.encoder.named_parameters()]

    def hyper_parameters(self):
        return [(f"hp.{n}", p) for n, p in self.hp.named_parameters()]
