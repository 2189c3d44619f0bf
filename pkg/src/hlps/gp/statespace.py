"""Exact online inference of the latent subgoal via the Matérn-3/2 state-space form.

The Matérn-3/2 prior is the stationary solution of a 2-dimensional linear SDE whose
"time" axis is the cumulative state distance. Along an ordered chain of states the
batch posterior can therefore be computed by a Kalman filter with constant memory
per state: predict with the evolution operator for ΔS_i = D(s_i, s_{i−1}), then
condition on the encoder output f_i through h = (1, 0)ᵀ.

The stationary covariance is diag(γ², 3γ²/ℓ²). A variant with 3γ²/ℓ in the second
entry is selectable (``sigma0="printed"``) only so the self-test can show that it
breaks the equivalence with the batch posterior.
"""

from __future__ import annotations

import math

import torch

from ..autodiff import DTYPE, safe_norm
from ..errors import StateSpaceError
from .types import Belief, EvolutionOperator, GPHyperparams

SIGMA0_VARIANTS = ("derived", "printed")


def _symmetrize(M: torch.Tensor) -> torch.Tensor:
    return 0.5 * (M + M.T)


def stationary_covariance(hp: GPHyperparams, sigma0: str = "derived") -> torch.Tensor:
    """Σ₀ = diag(γ², 3γ²/ℓ²) (or 3γ²/ℓ with ``sigma0="printed"``)."""
    if sigma0 not in SIGMA0_VARIANTS:
        raise StateSpaceError(f"unknown Σ₀ variant '{sigma0}', expected one of {SIGMA0_VARIANTS}")
    g, ell = hp.gamma2, hp.ell
    second = 3.0 * g / ell**2 if sigma0 == "derived" else 3.0 * g / ell
    return torch.diag(torch.stack([g, second]))


def initial_belief(hp: GPHyperparams, d: int = 2, sigma0: str = "derived") -> Belief:
    return Belief(mu=torch.zeros(2, d, dtype=DTYPE), Sigma=stationary_covariance(hp, sigma0))


def evolution(hp: GPHyperparams, delta_s: float, sigma0: str = "derived") -> EvolutionOperator:
    """Ψ = exp(A·ΔS) for A = [[0, 1], [−λ², −2λ]], λ = √3/ℓ, and Ω = Σ₀ − ΨΣ₀Ψᵀ.

    A has the repeated eigenvalue −λ, so Ψ = e^{−λΔ}·[[1 + λΔ, Δ], [−λ²Δ, 1 − λΔ]].
    """
    delta = float(delta_s)
    if not math.isfinite(delta) or delta < 0:
        raise StateSpaceError(f"state distance increment must be finite and >= 0, got {delta_s}")
    lam = math.sqrt(3.0) / hp.ell
    lam_delta = lam * delta
    decay = torch.exp(-lam_delta)
    one = torch.ones((), dtype=DTYPE)
    Psi = decay * torch.stack(
        [
            torch.stack([one + lam_delta, delta * one]),
            torch.stack([-lam**2 * delta, one - lam_delta]),
        ]
    )
    Sigma0 = stationary_covariance(hp, sigma0)
    Omega = _symmetrize(Sigma0 - Psi @ Sigma0 @ Psi.T)
    return EvolutionOperator(Psi=Psi, Omega=Omega)


def predict(belief: Belief, op: EvolutionOperator) -> Belief:
    """μ ← Ψμ, Σ ← ΨΣΨᵀ + Ω."""
    return Belief(
        mu=op.Psi @ belief.mu,
        Sigma=_symmetrize(op.Psi @ belief.Sigma @ op.Psi.T + op.Omega),
        last_state=belief.last_state,
    )


def update(belief: Belief, f: torch.Tensor, hp: GPHyperparams) -> Belief:
    """Condition every latent dimension on f through h = (1, 0)ᵀ with noise σ².

    The gain k = Σh / (hᵀΣh + σ²) is shared because Σ is shared.
    """
    if not torch.isfinite(f).all():
        raise StateSpaceError("non-finite observation f")
    Sigma = belief.Sigma
    innovation_var = Sigma[0, 0] + hp.sigma2
    if not innovation_var > 0:
        raise StateSpaceError(f"innovation variance must be > 0, got {innovation_var.item()}")
    gain = Sigma[:, 0] / innovation_var
    residual = f - belief.mu[0]
    mu = belief.mu + gain[:, None] * residual[None, :]
    Sigma = _symmetrize(Sigma - torch.outer(gain, Sigma[0, :]))
    return Belief(mu=mu, Sigma=Sigma, last_state=belief.last_state)


def step(belief: Belief, delta_s: float, f: torch.Tensor, hp: GPHyperparams, sigma0: str = "derived") -> Belief:
    """One predict/update cycle; ΔS = 0 makes the prediction the identity."""
    if delta_s > 0:
        belief = predict(belief, evolution(hp, delta_s, sigma0))
    return update(belief, f, hp)


def advance(belief: Belief, s: torch.Tensor, f: torch.Tensor, hp: GPHyperparams, sigma0: str = "derived") -> Belief:
    """Filter the next raw state of the episode; remembers ``s`` for the next increment."""
    delta = 0.0 if belief.last_state is None else max(safe_norm(s - belief.last_state).item(), 0.0)
    new = step(belief, delta, f, hp, sigma0)
    new.last_state = s.detach().clone()
    return new


def filter_chain(deltas: torch.Tensor, F: torch.Tensor, hp: GPHyperparams, sigma0: str = "derived") -> torch.Tensor:
    """Filtered means hᵀμ_i (N×d) for a chain given its N−1 distance increments."""
    n, d = F.shape
    if n < 1:
        raise StateSpaceError("filter needs at least one observation")
    if deltas.shape[0] != n - 1:
        raise StateSpaceError(f"expected {n - 1} increments for {n} observations, got {deltas.shape[0]}")
    out = torch.empty(n, d, dtype=DTYPE)
    belief = initial_belief(hp, d, sigma0)
    for i in range(n):
        delta = 0.0 if i == 0 else deltas[i - 1].item()
        belief = step(belief, delta, F[i], hp, sigma0)
        out[i] = belief.mu[0]
    return out


def filter_trajectory(states: torch.Tensor, F: torch.Tensor, hp: GPHyperparams, sigma0: str = "derived") -> torch.Tensor:
    """Filtered means for an ordered trajectory, ΔS_i = D(s_i, s_{i−1})."""
    if states.shape[0] != F.shape[0]:
        raise StateSpaceError(f"states and F differ in length: {states.shape[0]} vs {F.shape[0]}")
    deltas = safe_norm(states[1:] - states[:-1]).clamp(min=0.0)
    return filter_chain(deltas, F, hp, sigma0)
