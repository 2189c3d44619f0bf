"""Representation objective over (s_i, s_{i+1}, s_{i+k}) support triplets.

    loss = (Δf¹ / (Δf^k + ε)) · softplus(Δz¹ − Δz^k)

Δf are distances between encoder outputs, Δz between batch-posterior means over the
same support points. The ratio is a weighting coefficient: by default no gradient
flows through it (``ratio_grad=False``). A hinge variant with a margin replaces the
softplus term for the contrastive ablation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .autodiff import as_tensor, softplus, safe_norm
from .errors import ObjectiveError, TrainingError
from .gp import batch_posterior_many

logger = logging.getLogger(__name__)

LOSS_VARIANTS = ("hlps", "hinge")


@dataclass(frozen=True)
class LossOptions:
    variant: str = "hlps"
    ratio_grad: bool = False
    margin: float = 2.0
    eps: float = 1e-6

    def __post_init__(self) -> None:
        if self.variant not in LOSS_VARIANTS:
            raise ObjectiveError(f"unknown loss variant '{self.variant}', expected one of {LOSS_VARIANTS}")


@dataclass
class Triplet:
    """Three raw states of one episode: s_i, s_{i+1} and s_{i+k} (or the episode's last state)."""
    s_i: torch.Tensor
    s_next: torch.Tensor
    s_k: torch.Tensor
    k: int
    episodes: tuple[int, int, int] = (0, 0, 0)


@dataclass
class TripletBatch:
    states: torch.Tensor  # (B, 3, ds)
    episodes: np.ndarray  # (B, 3)

    @classmethod
    def from_triplets(cls, triplets: Sequence[Triplet]) -> "TripletBatch":
        if not triplets:
            raise ObjectiveError("empty triplet batch")
        states = torch.stack([torch.stack([t.s_i, t.s_next, t.s_k]) for t in triplets])
        return cls(states=states, episodes=np.array([t.episodes for t in triplets]))

    @classmethod
    def from_arrays(cls, states: np.ndarray, episodes: np.ndarray) -> "TripletBatch":
        return cls(states=as_tensor(states), episodes=np.asarray(episodes))


def loss_from_distances(
    df1: torch.Tensor,
    dfk: torch.Tensor,
    dz1: torch.Tensor,
    dzk: torch.Tensor,
    options: LossOptions = LossOptions(),
) -> torch.Tensor:
    """Per-triplet loss values from the four distances."""
    if options.variant == "hinge":
        return torch.relu(dz1 - dzk + options.margin)
    ratio = df1 / (dfk + options.eps)
    if not options.ratio_grad:
        ratio = ratio.detach()
    return ratio * softplus(dz1 - dzk)


def _check_episodes(episodes: np.ndarray) -> None:
    if episodes.size == 0:
        raise ObjectiveError("empty triplet batch")
    if not (episodes == episodes[:, :1]).all():
        raise ObjectiveError("triplet batch mixes states from different episodes")


def _latents(model, states: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    F = model.encode(states)
    if not model.uses_gp:
        return F, F
    return F, batch_posterior_many(states, F, model.hp).Z_mean


def _triplet_terms(F: torch.Tensor, Z: torch.Tensor, i: int, options: LossOptions) -> torch.Tensor:
    a, b, c = i, i + 1, i + 2
    return loss_from_distances(
        safe_norm(F[:, a] - F[:, b]),
        safe_norm(F[:, a] - F[:, c]),
        safe_norm(Z[:, a] - Z[:, b]),
        safe_norm(Z[:, a] - Z[:, c]),
        options,
    )


def hlps_loss(model, batch: TripletBatch | Sequence[Triplet], options: LossOptions = LossOptions()) -> torch.Tensor:
    """Mean objective over a batch of triplets; Z is the posterior over each triplet's 3 support points."""
    if not isinstance(batch, TripletBatch):
        batch = TripletBatch.from_triplets(batch)
    _check_episodes(batch.episodes)
    F, Z = _latents(model, batch.states)
    return _triplet_terms(F, Z, 0, options).mean()


def window_loss(model, windows: torch.Tensor, episodes: np.ndarray, options: LossOptions = LossOptions()) -> torch.Tensor:
    """Objective over windows of T high-level segments.

    Each window holds 2T+1 support states laid out as
    [s_0, s_1, s_k, s_{k+1}, ..., s_{(T−1)k}, s_{(T−1)k+1}, s_{Tk}]; Z is the joint
    posterior over all of them and the loss averages the T triplets (2j, 2j+1, 2j+2).
    """
    _check_episodes(episodes)
    n_support = windows.shape[1]
    if n_support < 3 or n_support % 2 == 0:
        raise ObjectiveError(f"a window needs 2T+1 support states, got {n_support}")
    F, Z = _latents(model, windows)
    terms = [_triplet_terms(F, Z, 2 * j, options) for j in range((n_support - 1) // 2)]
    return torch.stack(terms, dim=1).mean()


def representation_update(
    model,
    buffer,
    which: str,
    batch_size: int,
    optimizer,
    rng: np.random.Generator,
    *,
    k: int,
    T: int = 1,
    options: LossOptions = LossOptions(),
) -> float | None:
    """One gradient step of the objective on the encoder or on the GP hyperparameters.

    Gradients are taken only with respect to ``optimizer``'s own parameter group, so an
    encoder update never moves the hyperparameters and vice versa.

    Returns:
        The loss value, or None when the buffer cannot supply a batch yet.
    """
    if which == "encoder":
        sample = buffer.sample_triplets(batch_size, k, rng)
        if sample is None:
            return None
        loss = hlps_loss(model, TripletBatch.from_arrays(sample.states, sample.episodes), options)
    elif which == "hyperparams":
        sample = buffer.sample_windows(batch_size, k, T, rng)
        if sample is None:
            return None
        loss = window_loss(model, as_tensor(sample.states), sample.episodes, options)
    else:
        raise ObjectiveError(f"unknown parameter group '{which}', expected 'encoder' or 'hyperparams'")

    if not torch.isfinite(loss):
        raise TrainingError(f"non-finite representation loss during {which} update")
    params = optimizer.parameters()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    for p, g in zip(params, grads):
        p.grad = torch.zeros_like(p) if g is None else g
    optimizer.step()
    if which == "hyperparams":
        model.hp.check()
    return loss.item()
