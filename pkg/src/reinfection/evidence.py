"""Marginal likelihoods by prior Monte Carlo, and Bayes factors."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EvidenceUnderflowError, ValidationError
from .inference import DEFAULT_SAMPLED, LogPosterior, ObservationSeries
from .model import ParameterSet, StateVector, VaccinationPolicy


@dataclass(frozen=True)
class EvidenceEstimate:
    log_marginal: float
    n_draws: int
    n_zero: int
    seed: Optional[int] = None

    def __float__(self) -> float:
        return self.log_marginal


def _log_mean_exp(values: np.ndarray) -> float:
    top = values.max()
    return float(top + math.log(np.exp(values - top).sum()) - math.log(values.size))


def prior_mc_log_evidence(log_likelihood: Callable[[np.ndarray], float],
                          sample_prior: Callable[[np.random.Generator, int], np.ndarray],
                          n_draws: int, seed: int, threads: int = 1) -> EvidenceEstimate:
    """``log mean exp(log_likelihood)`` over ``n_draws`` prior samples.

    ``sample_prior(rng, n)`` returns an ``(n, d)`` array.  Draws with zero
    likelihood count toward the mean; if every draw has zero likelihood the
    estimate underflows and :class:`EvidenceUnderflowError` is raised.
    """
    if n_draws < 1:
        raise ValidationError(f"n_prior_draws must be >= 1, got {n_draws}")
    rng = np.random.default_rng(seed)
    points = np.asarray(sample_prior(rng, n_draws), dtype=float)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ll = np.fromiter(pool.map(log_likelihood, points), float, n_draws)
    else:
        ll = np.fromiter(map(log_likelihood, points), float, n_draws)
    ll[np.isnan(ll)] = -math.inf
    finite = np.isfinite(ll)
    if not finite.any():
        raise EvidenceUnderflowError(
            f"all {n_draws} prior draws have zero likelihood", n_draws, n_draws
        )
    # -inf draws still count in the denominator of the mean
    log_marginal = _log_mean_exp(ll[finite]) + math.log(finite.sum() / n_draws)
    return EvidenceEstimate(log_marginal, n_draws, int((~finite).sum()), seed)


def evidence_estimate(obs: ObservationSeries, model_tag, initial: StateVector,
                      policy: VaccinationPolicy, template: ParameterSet,
                      n_prior_draws: int, seed: int,
                      sampled: Sequence[str] = DEFAULT_SAMPLED,
                      threads: int = 1) -> EvidenceEstimate:
    """Prior Monte Carlo evidence of one model.

    Sampled rates are drawn from Exp(1) (``kappa`` from Uniform(0, 1));
    everything else stays at ``template``.  Parameter points whose
    integration fails score zero likelihood.
    """
    posterior = LogPosterior(obs, model_tag, initial, policy, template, sampled)
    is_kappa = posterior.is_kappa

    def sample_prior(rng, n):
        draws = rng.exponential(1.0, size=(n, is_kappa.size))
        if is_kappa.any():
            draws[:, is_kappa] = rng.uniform(0.0, 1.0, size=(n, int(is_kappa.sum())))
        return draws

    return prior_mc_log_evidence(posterior.log_likelihood, sample_prior,
                                 n_prior_draws, seed, threads)


def log_marginal_likelihood(obs: ObservationSeries, model_tag, initial: StateVector,
                            policy: VaccinationPolicy, template: ParameterSet,
                            n_prior_draws: int, seed: int,
                            sampled: Sequence[str] = DEFAULT_SAMPLED,
                            threads: int = 1) -> float:
    return evidence_estimate(obs, model_tag, initial, policy, template,
                             n_prior_draws, seed, sampled, threads).log_marginal


def _near(value: float, accept) -> float:
    """First float within 4 ulps of ``value`` (nearest first) satisfying ``accept``."""
    up = down = value
    if accept(value):
        return value
    for _ in range(4):
        up = math.nextafter(up, math.inf)
        if accept(up):
            return up
        down = math.nextafter(down, -math.inf)
        if accept(down):
            return down
    raise ArithmeticError(f"no reciprocal partner near {value!r}")


def _reciprocal_pair(ratio: float) -> tuple[float, float]:
    """Floats ``(v, r)`` within a few ulps of ``(ratio, 1 / ratio)`` with
    ``v * r == 1`` exactly.

    For ``ratio >= 1`` the set of partners ``r`` that round ``v * r`` to 1
    is an interval wider than the float spacing whenever the mantissa of
    ``v`` is below 1.5; otherwise the same holds with the roles swapped.
    """
    mantissa = 2.0 * math.frexp(ratio)[0]
    if mantissa < 1.5:
        return ratio, _near(1.0 / ratio, lambda r: ratio * r == 1.0)
    partner = 1.0 / ratio
    return _near(ratio, lambda v: v * partner == 1.0), partner


# Past this log ratio the reciprocal of the Bayes factor is subnormal.
_MAX_LOG_RATIO = 708.0


def bayes_factor(log_ml_1: float, log_ml_2: float) -> float:
    """Marginal likelihood ratio of model 1 over model 2.

    ``bayes_factor(a, b) * bayes_factor(b, a) == 1`` holds exactly: both
    orderings come from one pair of floats, each within a few ulps of the
    exact ratio, whose product rounds to exactly 1.
    """
    if not (math.isfinite(log_ml_1) and math.isfinite(log_ml_2)):
        raise ValidationError("Bayes factor needs finite log marginal likelihoods")
    diff = log_ml_1 - log_ml_2
    if abs(diff) > _MAX_LOG_RATIO:
        return math.inf if diff > 0 else 0.0
    ratio, reciprocal = _reciprocal_pair(math.exp(abs(diff)))
    return ratio if diff >= 0 else reciprocal


# Kass & Raftery (1995) evidence categories on the Bayes-factor scale.
_BANDS = ((1.0, "no preference"),
          (3.2, "not worth more than a bare mention"),
          (10.0, "substantial"),
          (100.0, "strong"),
          (math.inf, "decisive"))


def interpret_bayes_factor(bf: float) -> str:
    """Plain-language strength of evidence, naming the favoured model."""
    if bf == 1.0:
        return "no preference between models"
    favoured, strength = ("model 1", bf) if bf > 1 else ("model 2", 1.0 / bf if bf > 0 else math.inf)
    for bound, label in _BANDS[1:]:
        if strength < bound:
            return f"{label} evidence for {favoured}"
    return f"decisive evidence for {favoured}"
