"""Reward plumbing between the two levels."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import torch

from ..autodiff import as_tensor, safe_norm


def intrinsic_reward(z_next: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
    """r_l = −||φ(s') − g||₂; works on single vectors or batches (last axis is latent)."""
    return -safe_norm(z_next - g)


@torch.no_grad()
def relabel_intrinsic_rewards(model, s: np.ndarray, s_next: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Recompute low-level rewards under the current representation.

    φ(s') is the batch posterior over the stored (s, s') pair, so rewards track the
    representation as it drifts during training.
    """
    pairs = as_tensor(np.stack([s, s_next], axis=1))
    z_next = model.phi_batch(pairs)[:, 1]
    return intrinsic_reward(z_next, as_tensor(g)).numpy()


def high_level_reward(env_rewards: Sequence[float]) -> float:
    """r_h = Σ r_env over the segment."""
    return math.fsum(env_rewards)
