"""Tests de φ(s): normalisation, encodeur, couche GP en ligne et par lot."""

import numpy as np
import pytest
import torch

from hlps.autodiff import as_tensor
from hlps.errors import RepresentationError
from hlps.gp import GPHyperparams, filter_trajectory
from hlps.representation import RepresentationModel, RunningNormalizer


def _model(variant="hlps", state_dim=3, seed=0):
    return RepresentationModel(state_dim, latent_dim=2, hidden=8, variant=variant,
                               hp=GPHyperparams(1.0, 1.0, 0.1), generator=torch.Generator().manual_seed(seed))


def test_running_normalizer_matches_numpy():
    rng = np.random.default_rng(0)
    data = rng.normal(loc=3.0, scale=2.0, size=(50, 4))
    norm = RunningNormalizer(4)
    norm.update(as_tensor(data[:20]))
    for row in data[20:]:
        norm.update(as_tensor(row))
    assert norm.mean.numpy() == pytest.approx(data.mean(axis=0), abs=1e-12)
    assert norm.std.numpy() == pytest.approx(np.sqrt(data.var(axis=0) + 1e-8), abs=1e-12)


def test_frozen_normalizer_ignores_updates():
    norm = RunningNormalizer(2)
    norm.update(as_tensor([[1.0, 2.0], [3.0, 4.0]]))
    norm.frozen = True
    norm.update(as_tensor([100.0, 100.0]))
    assert norm.mean.tolist() == [2.0, 3.0]
    assert norm.count.item() == 2


def test_encode_is_deterministic_and_checks_dimension():
    model = _model()
    s = as_tensor([0.1, -0.2, 0.3])
    assert torch.equal(model.encode(s), model.encode(s))
    assert torch.equal(_model().encode(s), model.encode(s))
    with pytest.raises(RepresentationError):
        model.encode(as_tensor([1.0, 2.0]))


def test_unknown_variant():
    with pytest.raises(RepresentationError):
        _model(variant="cosine")


def test_encoder_gradient_matches_finite_differences():
    from hlps.autodiff import gradient_check

    model = _model()
    s = as_tensor([[0.4, -0.1, 0.7], [1.0, 0.2, -0.3]])
    err, _ = gradient_check(lambda: model.encode(s).pow(2).sum(), dict(model.encoder_parameters()))
    assert err < 1e-6


def test_phi_online_matches_filter_over_trajectory():
    """z_t du filtre en ligne = moyenne filtrée sur la trajectoire complète."""
    model = _model()
    rng = np.random.default_rng(1)
    states = as_tensor(np.cumsum(rng.normal(scale=0.3, size=(15, 3)), axis=0))
    belief = model.new_belief()
    online = []
    for s in states:
        z, belief = model.phi_online(belief, s)
        online.append(z)
    with torch.no_grad():
        expected = filter_trajectory(states, model.encode(states), model.hp)
    assert torch.allclose(torch.stack(online), expected, atol=1e-10)


def test_phi_batch_single_state_is_shrunk_encoding():
    model = _model()
    s = as_tensor([[0.5, 0.5, 0.5]])
    with torch.no_grad():
        z = model.phi_batch(s)
        f = model.encode(s)
    assert torch.allclose(z, f * 1.0 / 1.1, atol=1e-12)


def test_phi_batch_stack_matches_single_windows():
    model = _model()
    rng = np.random.default_rng(2)
    windows = as_tensor(rng.normal(size=(3, 4, 3)))
    with torch.no_grad():
        many = model.phi_batch(windows)
        for b in range(3):
            assert torch.allclose(many[b], model.phi_batch(windows[b]), atol=1e-12)


def test_random_projection_is_fixed_and_skips_gp():
    model = _model(variant="random_projection")
    assert not model.trainable
    assert not model.uses_gp
    assert not any(p.requires_grad for p in model.parameters())
    states = as_tensor(np.random.default_rng(3).normal(size=(5, 3)))
    assert torch.equal(model.phi_batch(states), model.encode(states))
    z, belief = model.phi_online(model.new_belief(), states[0])
    assert torch.equal(z, model.encode(states[0]))
    assert torch.equal(belief.last_state, states[0])


def test_frozen_variant_keeps_gp_but_no_gradients():
    model = _model(variant="frozen")
    assert model.uses_gp and not model.trainable
    assert not any(p.requires_grad for p in model.parameters())


def test_parameter_groups_are_disjoint():
    model = _model()
    encoder = {name for name, _ in model.encoder_parameters()}
    hyper = {name for name, _ in model.hyper_parameters()}
    assert hyper == {"hp.log_gamma2", "hp.log_ell", "hp.log_sigma2"}
    assert encoder and not encoder & hyper


def test_phi_batch_is_permutation_equivariant():
    model = _model()
    rng = np.random.default_rng(4)
    states = as_tensor(rng.normal(size=(6, 3)))
    perm = torch.as_tensor(rng.permutation(6))
    with torch.no_grad():
        assert torch.allclose(model.phi_batch(states[perm]), model.phi_batch(states)[perm], atol=1e-12)


def test_lipschitz_ratios_are_finite_on_the_maze_box():
    """10⁴ paires d'états tirées dans [0, 12]³: |z(s) − z(s′)| / |s − s′| fini."""
    model = _model()
    rng = np.random.default_rng(5)
    a = as_tensor(rng.uniform(0.0, 12.0, size=(10_000, 1, 3)))
    b = as_tensor(rng.uniform(0.0, 12.0, size=(10_000, 1, 3)))
    with torch.no_grad():
        dz = (model.phi_batch(a) - model.phi_batch(b)).norm(dim=-1).squeeze(-1)
    ratios = dz / (a - b).norm(dim=-1).squeeze(-1)
    assert torch.isfinite(ratios).all()
