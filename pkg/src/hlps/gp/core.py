"""Matérn-3/2 kernel and the batch GP posterior over a window of support states.

Every latent dimension is an independent GP sharing one kernel: the kernel only
sees raw states, so the covariance matrix C is computed once per window and
applied column-wise to F. All functions accept leading batch dimensions
(``states: (..., N, ds)``, ``F: (..., N, d)``) so that many triplets or windows
can be solved in one call.
"""

from __future__ import annotations

import logging
import math

import torch

from ..autodiff import safe_norm
from ..errors import GPError
from .types import BatchPosterior, GPHyperparams, SupportWindow

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
JITTER_SCHEDULE = (1e-8, 1e-6, 1e-4)


def _check_finite(states: torch.Tensor) -> None:
    if not torch.isfinite(states).all():
        raise GPError("non-finite state component passed to the kernel")


def matern32_from_distance(D: torch.Tensor, hp: GPHyperparams) -> torch.Tensor:
    """γ²(1 + √3·D/ℓ)·exp(−√3·D/ℓ), elementwise in D."""
    r = SQRT3 * D / hp.ell
    return hp.gamma2 * (1.0 + r) * torch.exp(-r)


def matern32(s_i: torch.Tensor, s_j: torch.Tensor, hp: GPHyperparams) -> torch.Tensor:
    """Kernel value between two raw states, D being their Euclidean distance."""
    if s_i.shape != s_j.shape:
        raise GPError(f"states of different dimension: {tuple(s_i.shape)} vs {tuple(s_j.shape)}")
    _check_finite(s_i)
    _check_finite(s_j)
    return matern32_from_distance(safe_norm(s_i - s_j), hp)


def pairwise_distances(states: torch.Tensor) -> torch.Tensor:
    """Euclidean distance matrix (..., N, N); identical rows give exactly 0."""
    return torch.cdist(states, states, p=2.0, compute_mode="donot_use_mm_for_euclid_dist")


def chain_distances(deltas: torch.Tensor) -> torch.Tensor:
    """Distances along a chain: D(a, b) = sum of the consecutive increments between a and b.

    Args:
        deltas: the N−1 nonnegative increments ΔS_1..ΔS_{N−1}.
    """
    cum = torch.cat([deltas.new_zeros(1), torch.cumsum(deltas, dim=0)])
    return torch.abs(cum[:, None] - cum[None, :])


def covariance_matrix(states: torch.Tensor, hp: GPHyperparams) -> torch.Tensor:
    """C_ij = κ(s_i, s_j); symmetric with γ² on the diagonal."""
    if states.shape[-2] < 1:
        raise GPError("covariance_matrix needs at least one state")
    _check_finite(states)
    return matern32_from_distance(pairwise_distances(states), hp)


def jitter_cholesky(A: torch.Tensor) -> torch.Tensor:
    """Lower Cholesky factor of A, adding diagonal jitter 1e-8, 1e-6, 1e-4 if plain factorisation fails."""
    L, info = torch.linalg.cholesky_ex(A)
    if not info.any():
        return L
    eye = torch.eye(A.shape[-1], dtype=A.dtype)
    for jitter in JITTER_SCHEDULE:
        L, info = torch.linalg.cholesky_ex(A + jitter * eye)
        if not info.any():
            logger.debug("Cholesky succeeded with jitter %.0e", jitter)
            return L
    raise GPError(f"Cholesky failed after jitter escalation up to {JITTER_SCHEDULE[-1]:.0e}")


def posterior_from_covariance(C: torch.Tensor, F: torch.Tensor, sigma2: torch.Tensor) -> BatchPosterior:
    """Z = C(C + σ²I)⁻¹F and diag(C − C(C + σ²I)⁻¹C), via one Cholesky factorisation."""
    n = C.shape[-1]
    L = jitter_cholesky(C + sigma2 * torch.eye(n, dtype=C.dtype))
    Z_mean = C @ torch.cholesky_solve(F, L)
    V = torch.linalg.solve_triangular(L, C, upper=False)
    var = torch.clamp(torch.diagonal(C, dim1=-2, dim2=-1) - (V * V).sum(dim=-2), min=0.0)
    return BatchPosterior(Z_mean=Z_mean, Z_var=var.unsqueeze(-1).expand_as(F))


def batch_posterior(window: SupportWindow, hp: GPHyperparams) -> BatchPosterior:
    return posterior_from_covariance(covariance_matrix(window.states, hp), window.F, hp.sigma2)


def batch_posterior_many(states: torch.Tensor, F: torch.Tensor, hp: GPHyperparams) -> BatchPosterior:
    """Posterior for a stack of windows: states (B, N, ds), F (B, N, d)."""
    if states.shape[:-1] != F.shape[:-1]:
        raise GPError(f"states {tuple(states.shape)} and F {tuple(F.shape)} are not aligned")
    if not torch.isfinite(F).all():
        raise GPError("non-finite row in F")
    return posterior_from_covariance(covariance_matrix(states, hp), F, hp.sigma2)
