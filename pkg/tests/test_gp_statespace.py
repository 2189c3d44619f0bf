"""Tests de la forme état-espace: opérateur d'évolution, filtre de Kalman et équivalence avec le lot."""

import math

import numpy as np
import pytest
import torch

from hlps.autodiff import DTYPE, as_tensor
from hlps.errors import StateSpaceError
from hlps.gp import (
    GPHyperparams,
    SupportWindow,
    advance,
    batch_posterior,
    evolution,
    filter_chain,
    filter_trajectory,
    initial_belief,
    predict,
    stationary_covariance,
    update,
)
from hlps.gp.core import chain_distances, matern32_from_distance, posterior_from_covariance
from hlps.gp.statespace import step


@pytest.mark.parametrize("gamma2, ell, expected", [(1.0, 1.0, [1.0, 3.0]), (4.0, 2.0, [4.0, 3.0])])
def test_stationary_covariance(gamma2, ell, expected):
    Sigma = stationary_covariance(GPHyperparams(gamma2, ell, 0.1))
    assert torch.diagonal(Sigma).tolist() == pytest.approx(expected, rel=1e-14)
    assert Sigma[0, 1].item() == 0.0


def test_unknown_sigma0_variant():
    with pytest.raises(StateSpaceError):
        stationary_covariance(GPHyperparams(), "other")


def _series_expm(A: np.ndarray, terms: int = 30) -> np.ndarray:
    out, term = np.eye(2), np.eye(2)
    for n in range(1, terms):
        term = term @ A / n
        out = out + term
    return out


@pytest.mark.parametrize("delta", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("ell", [0.5, 1.0, 3.0])
def test_evolution_matches_matrix_exponential(delta, ell):
    """Ψ fermé contre la série de exp(A·ΔS) tronquée à 30 termes (scaling and squaring pour ΔS grand)."""
    hp = GPHyperparams(1.0, ell, 0.1)
    lam = math.sqrt(3.0) / ell
    A = np.array([[0.0, 1.0], [-lam**2, -2 * lam]]) * delta
    # exp(A) = exp(A / 2^s)^(2^s) keeps the truncated series accurate for large ΔS/ℓ
    s = 6
    expected = np.linalg.matrix_power(_series_expm(A / 2**s), 2**s)
    Psi = evolution(hp, delta).Psi.detach().numpy()
    assert np.allclose(Psi, expected, atol=1e-10)


def test_evolution_at_zero_increment_is_identity():
    op = evolution(GPHyperparams(2.0, 0.5, 0.1), 0.0)
    assert torch.allclose(op.Psi, torch.eye(2, dtype=DTYPE), atol=1e-15)
    assert torch.allclose(op.Omega, torch.zeros(2, 2, dtype=DTYPE), atol=1e-15)


def test_evolution_preserves_stationary_covariance():
    """Ψ Σ₀ Ψᵀ + Ω = Σ₀: prédire depuis le prior le laisse inchangé."""
    hp = GPHyperparams(1.7, 0.8, 0.1)
    belief = initial_belief(hp, d=2)
    predicted = predict(belief, evolution(hp, 0.6))
    assert torch.allclose(predicted.Sigma, belief.Sigma, atol=1e-12)


@pytest.mark.parametrize("bad", [-0.1, float("nan"), float("inf")])
def test_evolution_rejects_bad_increment(bad):
    with pytest.raises(StateSpaceError):
        evolution(GPHyperparams(), bad)


def test_update_rejects_non_finite_observation():
    hp = GPHyperparams()
    with pytest.raises(StateSpaceError):
        update(initial_belief(hp, 2), as_tensor([1.0, float("nan")]), hp)


def test_first_update_matches_single_point_posterior():
    """Premier état: aucune prédiction, la moyenne vaut f·γ²/(γ²+σ²)."""
    hp = GPHyperparams(2.0, 1.0, 0.5)
    belief = advance(initial_belief(hp, 2), as_tensor([0.0, 0.0]), as_tensor([1.0, -2.0]), hp)
    assert belief.mean.tolist() == pytest.approx([0.8, -1.6], abs=1e-12)
    assert belief.variance == pytest.approx(0.4, abs=1e-12)
    assert belief.last_state.tolist() == [0.0, 0.0]


def test_filter_matches_batch_posterior_on_every_prefix():
    """Moyenne filtrée à l'étape i = moyenne par lot sur les états 0..i, à 1e-8."""
    rng = np.random.default_rng(11)
    for _ in range(10):
        hp = GPHyperparams(*rng.uniform(0.1, 10.0, size=3))
        n = int(rng.integers(2, 25))
        deltas = as_tensor(rng.uniform(1e-3, 1.0, size=n - 1))
        F = as_tensor(rng.normal(size=(n, 2)))
        filtered = filter_chain(deltas, F, hp)
        C = matern32_from_distance(chain_distances(deltas), hp)
        for i in range(1, n + 1):
            batch = posterior_from_covariance(C[:i, :i], F[:i], hp.sigma2).Z_mean[i - 1]
            assert (batch - filtered[i - 1]).abs().max().item() < 1e-8


def test_filter_variance_matches_batch_variance():
    rng = np.random.default_rng(12)
    hp = GPHyperparams(1.5, 0.9, 0.3)
    states = as_tensor(np.cumsum(rng.uniform(0.05, 0.5, size=(8, 1)), axis=0))
    F = as_tensor(rng.normal(size=(8, 2)))
    belief = initial_belief(hp, 2)
    for i in range(8):
        belief = advance(belief, states[i], F[i], hp)
        batch = batch_posterior(SupportWindow(states=states[: i + 1], F=F[: i + 1]), hp)
        assert belief.variance == pytest.approx(batch.Z_var[i, 0].item(), abs=1e-10)


def test_printed_sigma0_breaks_equivalence():
    """Avec 3γ²/ℓ (au lieu de 3γ²/ℓ²) et ℓ ≠ 1, le filtre s'écarte du postérieur par lot."""
    hp = GPHyperparams(1.0, 3.0, 0.1)
    deltas = as_tensor([0.5, 0.5, 0.5, 0.5])
    F = as_tensor([[1.0], [0.0], [-1.0], [0.5], [2.0]])
    exact = filter_chain(deltas, F, hp, "derived")
    printed = filter_chain(deltas, F, hp, "printed")
    C = matern32_from_distance(chain_distances(deltas), hp)
    batch = posterior_from_covariance(C, F, hp.sigma2).Z_mean
    assert (exact[-1] - batch[-1]).abs().max().item() < 1e-8
    assert (printed[-1] - batch[-1]).abs().max().item() > 1e-6


def test_repeated_state_skips_prediction():
    """ΔS = 0: l'état répété est une observation de plus au même point."""
    hp = GPHyperparams(1.0, 1.0, 0.2)
    states = as_tensor([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    F = as_tensor([[1.0], [1.2], [0.4]])
    filtered = filter_trajectory(states, F, hp)
    batch = batch_posterior(SupportWindow(states=states, F=F), hp).Z_mean
    assert (filtered[-1] - batch[-1]).abs().max().item() < 1e-8


def test_stationary_agent_converges_toward_f():
    """Observations répétées du même f: l'écart |z − f| décroît de façon monotone."""
    hp = GPHyperparams(1.0, 1.0, 0.5)
    f = as_tensor([2.0, -1.0])
    belief = initial_belief(hp, 2)
    gaps = []
    for _ in range(10):
        belief = step(belief, 0.0, f, hp)
        gaps.append((belief.mean - f).abs().max().item())
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_filter_chain_input_checks():
    hp = GPHyperparams()
    with pytest.raises(StateSpaceError):
        filter_chain(as_tensor([0.1, 0.2]), as_tensor(np.zeros((2, 2))), hp)
    with pytest.raises(StateSpaceError):
        filter_trajectory(as_tensor(np.zeros((3, 2))), as_tensor(np.zeros((2, 2))), hp)


def test_covariance_stays_symmetric_psd_over_many_cycles():
    """10⁵ cycles prédiction/mise à jour avec hyperparamètres et incréments aléatoires."""
    rng = np.random.default_rng(13)
    hps = [GPHyperparams(*rng.uniform(0.1, 10.0, size=3)) for _ in range(5)]
    ops = [[evolution(hp, delta) for delta in rng.exponential(1.0, size=20)] for hp in hps]
    worst = math.inf
    for which in range(5):
        hp, belief = hps[which], initial_belief(hps[which], d=2)
        choices = rng.integers(0, 20, size=20_000)
        observations = as_tensor(rng.normal(scale=3.0, size=(20_000, 2)))
        for i, op in enumerate(choices):
            belief = update(predict(belief, ops[which][op]), observations[i], hp)
            (a, b), (c, d) = belief.Sigma.tolist()
            assert b == c
            half_trace = 0.5 * (a + d)
            worst = min(worst, half_trace - math.sqrt(max(half_trace**2 - (a * d - b * c), 0.0)))
    assert worst >= -1e-10
