from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from ..autodiff import DTYPE
from ..errors import GPError

ELL_FLOOR = 1e-4


class GPHyperparams(nn.Module):
    """Hyperparamètres partagés du noyau Matérn-3/2 et de la vraisemblance.

    Champs (paramètres torch, stockés en log pour rester positifs sous descente de gradient):
      log_gamma2: log de la magnitude γ².
      log_ell: log de la longueur caractéristique ℓ (plancher 1e-4 après exponentiation).
      log_sigma2: log de la variance de bruit σ².
    """

    def __init__(self, gamma2: float = 1.0, ell: float = 1.0, sigma2: float = 0.1):
        super().__init__()
        for name, value in (("gamma2", gamma2), ("ell", ell), ("sigma2", sigma2)):
            if not (math.isfinite(value) and value > 0):
                raise GPError(f"{name} must be finite and > 0, got {value}")
        self.log_gamma2 = nn.Parameter(torch.tensor(math.log(gamma2), dtype=DTYPE))
        self.log_ell = nn.Parameter(torch.tensor(math.log(ell), dtype=DTYPE))
        self.log_sigma2 = nn.Parameter(torch.tensor(math.log(sigma2), dtype=DTYPE))

    @property
    def gamma2(self) -> torch.Tensor:
        return torch.exp(self.log_gamma2)

    @property
    def ell(self) -> torch.Tensor:
        return torch.clamp(torch.exp(self.log_ell), min=ELL_FLOOR)

    @property
    def sigma2(self) -> torch.Tensor:
        return torch.exp(self.log_sigma2)

    def values(self) -> tuple[float, float, float]:
        """(γ², ℓ, σ²) as Python floats."""
        return self.gamma2.item(), self.ell.item(), self.sigma2.item()

    def check(self) -> None:
        for name, value in zip(("gamma2", "ell", "sigma2"), self.values()):
            if not (math.isfinite(value) and value > 0):
                raise GPError(f"hyperparameter {name} left the positive reals: {value}")

    def __repr__(self) -> str:
        g, l, s = self.values()
        return f"GPHyperparams(gamma2={g:.6g}, ell={l:.6g}, sigma2={s:.6g})"


@dataclass
class SupportWindow:
    """Fenêtre de points support pour l'estimation GP par lot.

    Champs:
      states: états bruts ordonnés, tenseur N×ds.
      F: représentations latentes intermédiaires f = encodeur(s), tenseur N×d.
    """
    states: torch.Tensor
    F: torch.Tensor

    def __post_init__(self) -> None:
        if self.states.ndim != 2 or self.F.ndim != 2:
            raise GPError("SupportWindow expects states N×ds and F N×d")
        if self.states.shape[0] != self.F.shape[0]:
            raise GPError(f"states and F differ in length: {self.states.shape[0]} vs {self.F.shape[0]}")
        if self.states.shape[0] < 1:
            raise GPError("SupportWindow needs at least one support point")
        if not torch.isfinite(self.F).all():
            raise GPError("non-finite row in F")

    @property
    def N(self) -> int:
        return self.states.shape[0]

    @property
    def d(self) -> int:
        return self.F.shape[1]


@dataclass
class BatchPosterior:
    """Postérieur GP par lot sur une fenêtre de support.

    Champs:
      Z_mean: moyennes a posteriori, N×d.
      Z_var: variances marginales a posteriori, N×d (identiques d'une dimension latente à l'autre).
    """
    Z_mean: torch.Tensor
    Z_var: torch.Tensor


@dataclass
class EvolutionOperator:
    """Opérateur d'évolution de la forme état-espace du Matérn-3/2 pour un incrément ΔS.

    Champs:
      Psi: matrice de transition 2×2, exp(A·ΔS).
      Omega: incrément de bruit de processus 2×2, Σ₀ − Ψ Σ₀ Ψᵀ.
    """
    Psi: torch.Tensor
    Omega: torch.Tensor


@dataclass
class Belief:
    """Croyance du filtre de Kalman pour toutes les dimensions latentes.

    Champs:
      mu: moyennes (valeur, dérivée) empilées, 2×d.
      Sigma: covariance 2×2 partagée entre les dimensions latentes.
      last_state: état brut précédent s_{i−1}, None avant la première observation de l'épisode.
    """
    mu: torch.Tensor
    Sigma: torch.Tensor
    last_state: torch.Tensor | None = None

    @property
    def mean(self) -> torch.Tensor:
        """hᵀμ pour chaque dimension latente (vecteur de taille d)."""
        return self.mu[0]

    @property
    def variance(self) -> float:
        """hᵀΣh, variance marginale de la valeur latente."""
        return self.Sigma[0, 0].item()

    def clone(self) -> "Belief":
        return Belief(
            mu=self.mu.clone(),
            Sigma=self.Sigma.clone(),
            last_state=None if self.last_state is None else self.last_state.clone(),
        )
