from .core import (
    batch_posterior,
    batch_posterior_many,
    chain_distances,
    covariance_matrix,
    jitter_cholesky,
    matern32,
    posterior_from_covariance,
)
from .statespace import (
    advance,
    evolution,
    filter_chain,
    filter_trajectory,
    initial_belief,
    predict,
    stationary_covariance,
    update,
)
from .types import Belief, BatchPosterior, EvolutionOperator, GPHyperparams, SupportWindow

__all__ = [
    "GPHyperparams",
    "SupportWindow",
    "BatchPosterior",
    "Belief",
    "EvolutionOperator",
    "matern32",
    "covariance_matrix",
    "chain_distances",
    "jitter_cholesky",
    "posterior_from_covariance",
    "batch_posterior",
    "batch_posterior_many",
    "stationary_covariance",
    "initial_belief",
    "evolution",
    "predict",
    "update",
    "advance",
    "filter_chain",
    "filter_trajectory",
]
