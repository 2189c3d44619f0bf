"""Randomised oracle suites behind ``hlps selftest``.

- equivalence: the state-space filter against the batch posterior over every prefix
  of random chains (max abs error < 1e-8).
- kernel: positive semi-definiteness of C + 1e-8·I, single-point shrinkage and
  posterior-variance bounds.
- gradients: autograd against central differences for the representation objective
  (encoder and GP hyperparameters) and for the SAC losses on width-4 networks.

Every case draws from ``SeedSequence([seed, suite, case])`` so a failing case can be
replayed alone from its reported case number.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from ._measure_time import format_duration, measure_time
from .autodiff import DTYPE, as_tensor, gradient_check
from .errors import GPError, StateSpaceError
from .gp import GPHyperparams, chain_distances, covariance_matrix, filter_chain, posterior_from_covariance
from .gp.core import matern32_from_distance
from .objective import LossOptions, TripletBatch, hlps_loss
from .representation import RepresentationModel
from .rl import SacAgent, SacBatch, SacConfig

logger = logging.getLogger(__name__)

EQUIVALENCE_TOL = 1e-8
SHRINKAGE_TOL = 1e-10
REPR_GRAD_TOL = 1e-4
SAC_GRAD_TOL = 1e-3
HP_RANGE = (0.1, 10.0)
MAX_CHAIN = 50


@dataclass
class SuiteResult:
    """Résultat d'une suite d'oracles.

    Champs:
      name: nom de la suite.
      cases: nombre de cas tirés.
      max_error: pire erreur observée (inf si un cas a levé une erreur numérique).
      tolerance: seuil d'acceptation.
      failures: numéros des cas hors tolérance.
      elapsed: durée en secondes.
    """
    name: str
    cases: int
    max_error: float
    tolerance: float
    failures: list[int] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def failure_rate(self) -> float:
        return len(self.failures) / self.cases if self.cases else 0.0

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = (f"[{status}] {self.name}: {self.cases} cases, max error {self.max_error:.3e} "
                f"(tolerance {self.tolerance:.0e}), {format_duration(self.elapsed)}")
        if self.failures:
            shown = ", ".join(str(c) for c in self.failures[:10])
            more = f" (+{len(self.failures) - 10} more)" if len(self.failures) > 10 else ""
            line += f"\n    {len(self.failures)} failing cases ({100 * self.failure_rate:.1f}%): {shown}{more}"
        return line


def _case_rng(seed: int, suite: int, case: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, suite, case]))


def _random_hp(rng: np.random.Generator) -> GPHyperparams:
    gamma2, ell, sigma2 = rng.uniform(*HP_RANGE, size=3)
    return GPHyperparams(float(gamma2), float(ell), float(sigma2))


def equivalence_case(rng: np.random.Generator, sigma0: str = "derived") -> float:
    """Max abs difference between filtered means and prefix batch posteriors for one chain."""
    n = int(rng.integers(1, MAX_CHAIN + 1))
    d = int(rng.integers(1, 4))
    hp = _random_hp(rng)
    deltas = as_tensor(rng.uniform(1e-3, 1.0, size=n - 1))
    F = as_tensor(rng.normal(size=(n, d)))
    with torch.no_grad():
        filtered = filter_chain(deltas, F, hp, sigma0)
        D = chain_distances(deltas)
        C = matern32_from_distance(D, hp)
        worst = 0.0
        for i in range(1, n + 1):
            batch = posterior_from_covariance(C[:i, :i], F[:i], hp.sigma2).Z_mean[i - 1]
            worst = max(worst, float((batch - filtered[i - 1]).abs().max()))
    return worst


@measure_time
def equivalence_suite(cases: int = 1000, seed: int = 0, sigma0: str = "derived") -> SuiteResult:
    start = time.perf_counter()
    result = SuiteResult(name=f"filter/batch equivalence (Σ₀ {sigma0})", cases=cases, max_error=0.0, tolerance=EQUIVALENCE_TOL)
    for case in range(cases):
        try:
            err = equivalence_case(_case_rng(seed, 0, case), sigma0)
        except (StateSpaceError, GPError) as exc:
            logger.debug("equivalence case %d raised: %s", case, exc)
            err = float("inf")
        result.max_error = max(result.max_error, err)
        if not err < EQUIVALENCE_TOL:
            result.failures.append(case)
    result.elapsed = time.perf_counter() - start
    return result


def kernel_case(rng: np.random.Generator) -> float:
    """Worst violation among PSD, shrinkage and variance-bound checks (0 when all hold)."""
    n = int(rng.integers(1, 31))
    ds = int(rng.integers(1, 8))
    hp = _random_hp(rng)
    states = as_tensor(rng.normal(scale=rng.uniform(0.1, 5.0), size=(n, ds)))
    F = as_tensor(rng.normal(size=(n, 2)))
    with torch.no_grad():
        C = covariance_matrix(states, hp)
        _, info = torch.linalg.cholesky_ex(C + 1e-8 * torch.eye(n, dtype=DTYPE))
        if info.item() != 0:
            return float("inf")
        gamma2 = hp.gamma2.item()
        post = posterior_from_covariance(C, F, hp.sigma2)
        var_violation = max(0.0, -post.Z_var.min().item(), post.Z_var.max().item() - gamma2 * (1 + 1e-12))
        single = posterior_from_covariance(C[:1, :1], F[:1], hp.sigma2).Z_mean
        expected = F[:1] * gamma2 / (gamma2 + hp.sigma2.item())
        shrink_err = (single - expected).abs().max().item()
    return max(var_violation, shrink_err)


@measure_time
def kernel_suite(cases: int = 1000, seed: int = 0) -> SuiteResult:
    start = time.perf_counter()
    result = SuiteResult(name="kernel PSD / shrinkage / variance bounds", cases=cases, max_error=0.0, tolerance=SHRINKAGE_TOL)
    for case in range(cases):
        try:
            err = kernel_case(_case_rng(seed, 1, case))
        except GPError:
            err = float("inf")
        result.max_error = max(result.max_error, err)
        if not err < SHRINKAGE_TOL:
            result.failures.append(case)
    result.elapsed = time.perf_counter() - start
    return result


def representation_gradient_case(rng: np.random.Generator, max_coords: int = 12) -> float:
    """Objective gradient w.r.t. encoder weights and log-hyperparameters (ratio included)."""
    generator = torch.Generator().manual_seed(int(rng.integers(2**31)))
    model = RepresentationModel(state_dim=3, latent_dim=2, hidden=4, hp=_random_hp(rng), generator=generator)
    batch = TripletBatch.from_arrays(rng.normal(size=(4, 3, 3)), np.zeros((4, 3), dtype=int))
    options = LossOptions(ratio_grad=True)
    params = dict(model.encoder_parameters() + model.hyper_parameters())
    err, _ = gradient_check(lambda: hlps_loss(model, batch, options), params, max_coords=max_coords, generator=generator)
    return err


def sac_gradient_case(rng: np.random.Generator, max_coords: int = 12) -> float:
    """Critic, actor and temperature losses against their own parameters, with frozen noise."""
    generator = torch.Generator().manual_seed(int(rng.integers(2**31)))
    obs_dim, action_dim, n = 3, 2, 5
    agent = SacAgent(obs_dim, action_dim, -1.0, 1.0, SacConfig(hidden=4), generator)
    batch = SacBatch.from_arrays(
        rng.normal(size=(n, obs_dim)),
        rng.uniform(-0.9, 0.9, size=(n, action_dim)),
        rng.normal(size=n),
        rng.normal(size=(n, obs_dim)),
        (rng.random(n) < 0.2).astype(float),
    )
    noise = as_tensor(rng.normal(size=(n, action_dim)))
    next_noise = as_tensor(rng.normal(size=(n, action_dim)))
    critic_params = {f"q1.{k}": p for k, p in agent.q1.named_parameters()}
    critic_params.update({f"q2.{k}": p for k, p in agent.q2.named_parameters()})
    actor_params = {f"actor.{k}": p for k, p in agent.actor.named_parameters()}
    critic_err, _ = gradient_check(lambda: agent.critic_loss(batch, next_noise), critic_params, max_coords=max_coords, generator=generator)
    actor_err, _ = gradient_check(lambda: agent.actor_loss(batch, noise)[0], actor_params, max_coords=max_coords, generator=generator)
    with torch.no_grad():
        log_prob = agent.actor_loss(batch, noise)[1]
    alpha_err, _ = gradient_check(lambda: agent.alpha_loss(log_prob), {"log_alpha": agent.log_alpha})
    return max(critic_err, actor_err, alpha_err)


@measure_time
def gradient_suite(cases: int = 100, seed: int = 0) -> list[SuiteResult]:
    results = []
    for suite_id, (name, fn, tol) in enumerate(
        (("representation objective gradients", representation_gradient_case, REPR_GRAD_TOL),
         ("SAC loss gradients", sac_gradient_case, SAC_GRAD_TOL)),
        start=2,
    ):
        start = time.perf_counter()
        result = SuiteResult(name=name, cases=cases, max_error=0.0, tolerance=tol)
        for case in range(cases):
            err = fn(_case_rng(seed, suite_id, case))
            result.max_error = max(result.max_error, err)
            if not err < tol:
                result.failures.append(case)
        result.elapsed = time.perf_counter() - start
        results.append(result)
    return results


def run_selftest(cases: int = 1000, grad_cases: int = 100, seed: int = 0, sigma0: str = "derived") -> list[SuiteResult]:
    """All suites; ``cases`` sizes the equivalence and kernel suites."""
    results = [equivalence_suite(cases, seed, sigma0), kernel_suite(cases, seed)]
    results.extend(gradient_suite(grad_cases, seed))
    for result in results:
        logger.info(result.summary())
    return results
