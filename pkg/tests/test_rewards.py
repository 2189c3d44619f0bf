"""Tests des récompenses intrinsèques et haut niveau."""

import math

import numpy as np
import pytest
import torch

from hlps.autodiff import as_tensor
from hlps.gp import GPHyperparams
from hlps.representation import RepresentationModel
from hlps.rl import high_level_reward, intrinsic_reward, relabel_intrinsic_rewards


def test_intrinsic_reward_is_negative_distance():
    rng = np.random.default_rng(0)
    z, g = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
    r = intrinsic_reward(as_tensor(z), as_tensor(g)).numpy()
    assert r == pytest.approx(-np.linalg.norm(z - g, axis=1), abs=1e-14)
    assert intrinsic_reward(as_tensor([1.0, 1.0]), as_tensor([1.0, 1.0])).item() == 0.0


def test_high_level_reward_sums_segment():
    rng = np.random.default_rng(1)
    for _ in range(10):
        rewards = rng.normal(size=int(rng.integers(1, 60))).tolist()
        assert high_level_reward(rewards) == math.fsum(rewards)
    assert high_level_reward([]) == 0.0


def test_relabel_uses_current_representation():
    """Projection aléatoire: φ(s') = P·s', donc r = −||P·s' − g||."""
    model = RepresentationModel(3, latent_dim=2, hidden=4, variant="random_projection",
                                generator=torch.Generator().manual_seed(0))
    rng = np.random.default_rng(2)
    s, s_next, g = rng.normal(size=(6, 3)), rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
    rewards = relabel_intrinsic_rewards(model, s, s_next, g)
    expected = -np.linalg.norm(s_next @ model.projection.numpy().T - g, axis=1)
    assert rewards == pytest.approx(expected, abs=1e-12)


def test_relabel_with_gp_layer_is_finite_and_nonpositive():
    model = RepresentationModel(3, latent_dim=2, hidden=4, hp=GPHyperparams(1.0, 1.0, 0.1),
                                generator=torch.Generator().manual_seed(0))
    rng = np.random.default_rng(3)
    rewards = relabel_intrinsic_rewards(model, rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), rng.normal(size=(5, 2)))
    assert rewards.shape == (5,)
    assert np.isfinite(rewards).all() and (rewards <= 0).all()
