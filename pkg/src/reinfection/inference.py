"""Priors, Poisson likelihood and Metropolis-Hastings calibration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import (
    InitializationError,
    InputError,
    InstabilityError,
    UndefinedStatisticError,
    ValidationError,
)
from .integrate import DEFAULT_STEP, _OK, _raw_integrate, batch_integrate
from .model import ModelTag, ParameterSet, StateVector, VaccinationPolicy

log = logging.getLogger(__name__)

SERIES = ("infected", "recovered", "deaths", "reinfected",
          "recovered_reinfected", "vaccinated")
SERIES_COMPARTMENT = {
    "infected": "I",
    "recovered": "RI",
    "deaths": "D",
    "reinfected": "II",
    "recovered_reinfected": "RR",
    "vaccinated": "V",
}
CUMULATIVE_SERIES = ("recovered", "deaths", "recovered_reinfected", "vaccinated")

# Floor applied to Poisson means before taking logs.
LAMBDA_FLOOR = 1e-10

# gamma2 and kappa are held fixed unless a config asks for them.
DEFAULT_SAMPLED = ("alpha", "beta", "gamma1", "phi", "mu", "eta", "zeta1", "zeta2")


# -- observations -------------------------------------------------------------

@dataclass(frozen=True)
class ObservationSeries:
    """Observed daily counts on a common day grid.

    ``observed[name]`` is a boolean mask; masked entries of ``counts[name]``
    are stored as 0 and never enter the likelihood.  Cumulative series must
    not decrease across observed days unless ``check_cumulative`` is off
    (draws from the per-day Poisson observation model are not monotone).
    """

    days: np.ndarray
    counts: Mapping[str, np.ndarray]
    observed: Mapping[str, np.ndarray]
    check_cumulative: bool = True

    def __post_init__(self):
        days = np.asarray(self.days)
        if days.ndim != 1 or days.size == 0:
            raise InputError("observation day grid must be a non-empty 1-d array")
        if not np.all(days == np.round(days)) or days.min() < 0:
            raise InputError("observation days must be non-negative integers")
        days = days.astype(np.int64)
        if np.any(np.diff(days) <= 0):
            raise InputError("observation days must be strictly increasing")
        counts, observed = {}, {}
        for name in SERIES:
            raw = np.asarray(self.counts.get(name, np.zeros(days.size)), dtype=float)
            mask = np.asarray(
                self.observed.get(name, np.ones(days.size, bool) if name in self.counts
                                  else np.zeros(days.size, bool)),
                dtype=bool,
            )
            if raw.shape != days.shape or mask.shape != days.shape:
                raise InputError(f"series {name} does not match the day grid")
            vals = np.where(mask, raw, 0.0)
            if not np.all(np.isfinite(vals)) or np.any(vals != np.round(vals)):
                bad = days[np.flatnonzero(~np.isfinite(vals) | (vals != np.round(vals)))[0]]
                raise InputError(f"series {name} has a non-integer count on day {bad}")
            if np.any(vals < 0):
                bad = days[np.flatnonzero(vals < 0)[0]]
                raise InputError(f"series {name} has a negative count on day {bad}")
            vals = vals.astype(np.int64)
            if self.check_cumulative and name in CUMULATIVE_SERIES:
                seen = vals[mask]
                drop = np.flatnonzero(np.diff(seen) < 0)
                if drop.size:
                    day = days[mask][drop[0] + 1]
                    raise ValidationError(
                        f"cumulative series {name} decreases on day {day}"
                    )
            vals.setflags(write=False)
            mask.setflags(write=False)
            counts[name] = vals
            observed[name] = mask
        days.setflags(write=False)
        object.__setattr__(self, "days", days)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def empty(cls, horizon: int) -> "ObservationSeries":
        """A grid ``0..horizon`` with every series masked (likelihood == 1)."""
        return cls(np.arange(horizon + 1), {}, {})

    @property
    def horizon(self) -> int:
        return int(self.days[-1])

    @property
    def n_observed(self) -> int:
        return int(sum(m.sum() for m in self.observed.values()))


def log_poisson(k, lam):
    """Poisson log-pmf with the mean floored at :data:`LAMBDA_FLOOR`."""
    lam = np.maximum(lam, LAMBDA_FLOOR)
    return k * np.log(lam) - lam - gammaln(np.asarray(k, dtype=float) + 1.0)


# -- prior --------------------------------------------------------------------

def _sampled_mask(names: Sequence[str], sampled: Sequence[str]) -> np.ndarray:
    sampled = set(sampled)
    return np.array(
        [n in sampled or n.rsplit("_", 1)[0] in sampled for n in names], dtype=bool
    )


def _log_prior_flat(values: np.ndarray, is_kappa: np.ndarray) -> float:
    if not is_kappa.any():
        total = float(values.sum())
        if not math.isfinite(total) or values.min() < 0:
            return -math.inf
        return -total
    if not np.all(np.isfinite(values)):
        return -math.inf
    rates = values[~is_kappa]
    if np.any(rates < 0):
        return -math.inf
    kappa = values[is_kappa]
    if np.any((kappa < 0) | (kappa > 1)):
        return -math.inf
    # Exp(1) for every rate, Beta(1, 1) (log-density 0) for kappa.
    return -float(rates.sum())


def log_prior(params: ParameterSet, sampled: Sequence[str] = DEFAULT_SAMPLED) -> float:
    """Log prior density over the sampled parameters.

    Rates carry independent Exp(1) priors; ``kappa`` (when sampled) carries a
    Beta(1, 1) prior.  Out-of-support values give ``-inf``.
    """
    names = params.names()
    mask = _sampled_mask(names, sampled)
    values = params.to_vector()[mask]
    is_kappa = np.array([n == "kappa" for n, m in zip(names, mask) if m], dtype=bool)
    return _log_prior_flat(values, is_kappa)


# -- likelihood ---------------------------------------------------------------

class _LikelihoodTerms:
    """Observation arrays stacked once so each evaluation is a few numpy calls."""

    def __init__(self, obs: ObservationSeries, tag: ModelTag):
        self.days = obs.days
        self.horizon = max(obs.horizon, 1)
        rows = [(name, tag.index(SERIES_COMPARTMENT[name])) for name in SERIES
                if obs.observed[name].any()]
        self.names = [r[0] for r in rows]
        self.columns = np.array([r[1] for r in rows], dtype=np.int64)
        if rows:
            self.k = np.stack([obs.counts[n] for n in self.names]).astype(float)
            self.mask = np.stack([obs.observed[n] for n in self.names])
            self.log_k_fact = gammaln(self.k + 1.0)
        self.active = bool(rows)

    def __call__(self, values: np.ndarray) -> float:
        if not self.active:
            return 0.0
        lam = np.maximum(values[self.days][:, self.columns].T, LAMBDA_FLOOR)
        terms = self.k * np.log(lam) - lam - self.log_k_fact
        return float(terms[self.mask].sum())


def log_likelihood(params: ParameterSet, obs: ObservationSeries, model_tag,
                   initial: StateVector, policy: VaccinationPolicy,
                   step: float = DEFAULT_STEP) -> float:
    """Poisson log-likelihood of every observed (unmasked) count.

    Raises :class:`InstabilityError` when the integration fails.
    """
    from .integrate import integrate

    tag = ModelTag.parse(model_tag)
    terms = _LikelihoodTerms(obs, tag)
    if not terms.active:
        return 0.0
    traj = integrate(tag, initial, params, policy, terms.horizon, step)
    return terms(traj.values)


class LogPosterior:
    """Unnormalised log posterior as a function of the sampled values.

    Integration failures and out-of-support points score ``-inf``.
    """

    def __init__(self, obs: ObservationSeries, model_tag, initial: StateVector,
                 policy: VaccinationPolicy, template: ParameterSet,
                 sampled: Sequence[str] = DEFAULT_SAMPLED,
                 step: float = DEFAULT_STEP):
        self.tag = ModelTag.parse(model_tag)
        self.initial = initial if isinstance(initial, StateVector) else StateVector(self.tag, initial)
        self.policy = policy
        self.template = template
        self.step = step
        self.names = template.names()
        self.mask = _sampled_mask(self.names, sampled)
        if not self.mask.any():
            raise InitializationError("no parameters selected for sampling")
        self.index = np.flatnonzero(self.mask)
        self.sampled_names = [self.names[i] for i in self.index]
        self.is_kappa = np.array([n == "kappa" for n in self.sampled_names], dtype=bool)
        self.has_kappa = bool(self.is_kappa.any())
        self.base = template.to_vector()
        self.terms = _LikelihoodTerms(obs, self.tag)
        self.n_evaluations = 0
        self.n_failures = 0

    def full_vector(self, x: np.ndarray) -> np.ndarray:
        full = self.base.copy()
        full[self.index] = x
        return full

    def initial_point(self) -> np.ndarray:
        return self.base[self.index].copy()

    def log_prior(self, x: np.ndarray) -> float:
        return _log_prior_flat(x, self.is_kappa)

    def log_likelihood(self, x: np.ndarray) -> float:
        if not self.terms.active:
            return 0.0
        params = self.template.from_vector(self.full_vector(x))
        if self.policy.effective_kappa(params) <= 0:
            return -math.inf
        self.n_evaluations += 1
        out, status, *_ = _raw_integrate(
            self.tag, self.initial.values, params, self.policy,
            self.terms.horizon, self.step,
        )
        if status != _OK:
            self.n_failures += 1
            return -math.inf
        n = self.tag.n_compartments
        return self.terms(np.maximum(out[:, :n], 0.0))

    def __call__(self, x: np.ndarray) -> float:
        lp = self.log_prior(x)
        if lp == -math.inf:
            return lp
        if self.has_kappa and np.any(x[self.is_kappa] == 0.0):
            return -math.inf
        return lp + self.log_likelihood(x)


# -- transforms ---------------------------------------------------------------
#
# Rates are proposed on the log scale and kappa on the logit scale.  The
# target in the unconstrained space gains log|dx/du|.

def to_unconstrained(x: np.ndarray, is_kappa: np.ndarray) -> np.ndarray:
    u = np.empty_like(x, dtype=float)
    with np.errstate(divide="ignore"):
        u[~is_kappa] = np.log(x[~is_kappa])
        k = x[is_kappa]
        u[is_kappa] = np.log(k) - np.log1p(-k)
    return u


def to_constrained(u: np.ndarray, is_kappa: np.ndarray) -> np.ndarray:
    x = np.empty_like(u, dtype=float)
    x[~is_kappa] = np.exp(u[~is_kappa])
    x[is_kappa] = 1.0 / (1.0 + np.exp(-u[is_kappa]))
    return x


def log_jacobian(u: np.ndarray, is_kappa: np.ndarray) -> float:
    uk = u[is_kappa]
    # log(k (1 - k)) for k = logistic(u)
    kappa_term = -np.logaddexp(0.0, uk) - np.logaddexp(0.0, -uk)
    return float(u[~is_kappa].sum() + kappa_term.sum())


def acceptance_probability(log_target_current: float, log_target_proposed: float) -> float:
    """Metropolis acceptance probability for a symmetric proposal."""
    if log_target_proposed == -math.inf:
        return 0.0
    diff = log_target_proposed - log_target_current
    return 1.0 if diff >= 0 else math.exp(diff)


# -- sampler ------------------------------------------------------------------

@dataclass
class SamplerConfig:
    n_draws: int = 50_000
    n_tuning_chains: int = 10
    tuning_length: int = 1_000
    seed: int = 0
    proposal_scales: Optional[Mapping[str, float]] = None
    initial_scale: float = 0.1
    acceptance_window: tuple[float, float] = (0.20, 0.45)
    sampled: tuple[str, ...] = DEFAULT_SAMPLED
    step: float = DEFAULT_STEP

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValidationError(f"n_draws must be >= 1, got {self.n_draws}")
        if self.n_tuning_chains < 0 or self.tuning_length < 0:
            raise ValidationError("tuning chain counts must be >= 0")
        low, high = self.acceptance_window
        if not 0 < low < high < 1:
            raise ValidationError(f"bad acceptance window {self.acceptance_window}")


@dataclass
class PosteriorDraws:
    """Retained posterior draws, one full parameter vector per row."""

    template: ParameterSet
    values: np.ndarray
    log_posterior: np.ndarray
    sampled: tuple[str, ...]
    acceptance_rates: dict[str, float] = field(default_factory=dict)
    proposal_scales: dict[str, float] = field(default_factory=dict)
    tuning: list[dict] = field(default_factory=list)
    seed: Optional[int] = None
    tuning_values: Optional[np.ndarray] = None
    tuning_log_posterior: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.log_posterior = np.asarray(self.log_posterior, dtype=float)
        if self.values.shape[0] == 0:
            raise ValidationError("posterior draws must be non-empty")
        if self.values.shape != (self.log_posterior.size, len(self.names)):
            raise ValidationError("draw matrix does not match the parameter layout")
        if not np.all(np.isfinite(self.log_posterior)):
            raise ValidationError("every retained draw needs a finite log posterior")

    @property
    def names(self) -> list[str]:
        return self.template.names()

    def __len__(self) -> int:
        return self.values.shape[0]

    def parameter_set(self, i: int) -> ParameterSet:
        return self.template.from_vector(self.values[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self.parameter_set(i), float(self.log_posterior[i])

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def thin_indices(self, max_draws: Optional[int]) -> np.ndarray:
        n = len(self)
        if max_draws is None or max_draws >= n:
            return np.arange(n)
        return np.unique(np.linspace(0, n - 1, max_draws).round().astype(np.int64))

    def summary(self, probs=(0.025, 0.975)) -> list[dict]:
        """Posterior mean and quantiles per parameter."""
        rows = []
        for j, name in enumerate(self.names):
            col = self.values[:, j]
            q = np.quantile(col, probs)
            rows.append({"parameter": name, "mean": float(col.mean()),
                         **{f"q{p:g}": float(v) for p, v in zip(probs, q)}})
        return rows


def _adapt(scale: float, rate: float, window: tuple[float, float]) -> float:
    low, high = window
    if low <= rate <= high:
        return scale
    target = 0.5 * (low + high)
    return scale * float(np.clip(rate / target, 0.1, 10.0))


def _component_log_jacobian(uj: float, kappa: bool) -> float:
    if kappa:
        return -float(np.logaddexp(0.0, uj) + np.logaddexp(0.0, -uj))
    return uj


def _sweep(x, u, lp, scales, target, is_kappa, rng, accepted):
    """One componentwise Metropolis sweep; updates ``x`` and ``u`` in place.

    ``lp`` is the target on the natural scale; the Jacobian of the changed
    component enters the acceptance ratio.
    """
    steps = scales * rng.standard_normal(u.size)
    log_uniforms = np.log(rng.random(u.size))
    for j in range(u.size):
        old_u, old_x = u[j], x[j]
        new_u = old_u + steps[j]
        if is_kappa[j]:
            new_x = 1.0 / (1.0 + math.exp(-new_u))
        else:
            new_x = math.exp(new_u)
        x[j] = new_x
        lp_prop = target(x)
        log_ratio = -math.inf
        if lp_prop > -math.inf:
            log_ratio = (lp_prop - lp
                         + _component_log_jacobian(new_u, is_kappa[j])
                         - _component_log_jacobian(old_u, is_kappa[j]))
        if log_uniforms[j] < log_ratio:
            u[j] = new_u
            lp = lp_prop
            accepted[j] += 1
        else:
            x[j] = old_x
    return lp


def run_metropolis(target: Callable[[np.ndarray], float], x0: np.ndarray,
                   is_kappa: np.ndarray, config: SamplerConfig,
                   names: Optional[Sequence[str]] = None,
                   progress: Optional[Callable[[str, int, int], None]] = None) -> dict:
    """Tune and run a componentwise random-walk Metropolis chain on ``target``.

    ``target`` is a log density on the constrained (natural) scale.  Returns
    the retained constrained draws, their target values and tuning metadata.
    """
    rng = np.random.default_rng(config.seed)
    x0 = np.asarray(x0, dtype=float)
    is_kappa = np.asarray(is_kappa, dtype=bool)
    names = list(names) if names is not None else [f"x{i}" for i in range(x0.size)]
    inside = np.where(is_kappa, (x0 > 0) & (x0 < 1), x0 > 0)
    if not np.all(inside & np.isfinite(x0)):
        bad = names[int(np.flatnonzero(~(inside & np.isfinite(x0)))[0])]
        raise InitializationError(
            f"starting value of {bad} is on the boundary of its support"
        )
    lp0 = target(x0)
    if not math.isfinite(lp0):
        raise InitializationError("starting point has zero posterior density")

    scales = np.full(x0.size, float(config.initial_scale))
    for j, name in enumerate(names):
        if config.proposal_scales and name in config.proposal_scales:
            scales[j] = float(config.proposal_scales[name])

    x = x0.copy()
    u = to_unconstrained(x, is_kappa)
    lp = lp0
    tuning = []
    tune_total = config.n_tuning_chains * config.tuning_length
    tune_x = np.empty((tune_total, x0.size))
    tune_lp = np.empty(tune_total)
    row = 0
    for chain in range(config.n_tuning_chains):
        accepted = np.zeros(x0.size)
        for _ in range(config.tuning_length):
            lp = _sweep(x, u, lp, scales, target, is_kappa, rng, accepted)
            tune_x[row] = x
            tune_lp[row] = lp
            row += 1
        rates = accepted / max(config.tuning_length, 1)
        tuning.append({"chain": chain, "scales": scales.tolist(),
                       "acceptance": rates.tolist()})
        scales = np.array([_adapt(s, r, config.acceptance_window)
                           for s, r in zip(scales, rates)])
        if progress:
            progress("tune", chain + 1, config.n_tuning_chains)

    draws = np.empty((config.n_draws, x0.size))
    log_target = np.empty(config.n_draws)
    accepted = np.zeros(x0.size)
    report_every = max(config.n_draws // 20, 1)
    for i in range(config.n_draws):
        lp = _sweep(x, u, lp, scales, target, is_kappa, rng, accepted)
        draws[i] = x
        log_target[i] = lp
        if progress and (i + 1) % report_every == 0:
            progress("sample", i + 1, config.n_draws)
    return {
        "draws": draws,
        "log_target": log_target,
        "acceptance": dict(zip(names, (accepted / config.n_draws).tolist())),
        "scales": dict(zip(names, scales.tolist())),
        "tuning": tuning,
        "tuning_draws": tune_x,
        "tuning_log_target": tune_lp,
    }


def mh_sample(obs: ObservationSeries, model_tag, initial: StateVector,
              policy: VaccinationPolicy, config: SamplerConfig,
              start: ParameterSet,
              progress: Optional[Callable[[str, int, int], None]] = None,
              ) -> PosteriorDraws:
    """Calibrate one model to ``obs`` with random-walk Metropolis-Hastings.

    Parameters not listed in ``config.sampled`` stay at their value in
    ``start``.  Tuning chains adapt each proposal scale toward
    ``config.acceptance_window`` and are discarded; ``config.n_draws``
    sweeps are then retained.  Deterministic for a given ``config.seed``.
    """
    posterior = LogPosterior(obs, model_tag, initial, policy, start,
                             config.sampled, config.step)
    result = run_metropolis(posterior, posterior.initial_point(), posterior.is_kappa,
                            config, posterior.sampled_names, progress)
    full = np.tile(posterior.base, (config.n_draws, 1))
    full[:, posterior.index] = result["draws"]
    tune_full = np.tile(posterior.base, (result["tuning_draws"].shape[0], 1))
    tune_full[:, posterior.index] = result["tuning_draws"]
    if posterior.n_failures:
        log.info("%d of %d likelihood evaluations failed to integrate",
                 posterior.n_failures, posterior.n_evaluations)
    return PosteriorDraws(
        template=start,
        values=full,
        log_posterior=result["log_target"],
        sampled=tuple(posterior.sampled_names),
        acceptance_rates=result["acceptance"],
        proposal_scales=result["scales"],
        tuning=result["tuning"],
        seed=config.seed,
        tuning_values=tune_full,
        tuning_log_posterior=result["tuning_log_target"],
    )


# -- fit diagnostics ------------------------------------------------------------

def trajectory_quantiles(draws: PosteriorDraws, model_tag, initial: StateVector,
                         policy: VaccinationPolicy, horizon: int,
                         probs: Sequence[float] = (0.025, 0.5, 0.975),
                         max_draws: Optional[int] = 2000, threads: int = 1,
                         step: float = DEFAULT_STEP) -> tuple[dict, int]:
    """Pointwise quantiles of each observed series' mean over posterior draws.

    Returns ``({series: array(len(probs), horizon + 1)}, n_failed)``.
    """
    tag = ModelTag.parse(model_tag)
    idx = draws.thin_indices(max_draws)
    params = [draws.parameter_set(i) for i in idx]
    results = batch_integrate(tag, initial, params, policy, horizon, step, threads)
    good = [r for r in results if not isinstance(r, Exception)]
    if not good:
        raise InstabilityError(float("nan"), "all", float("nan"),
                               f"every posterior draw failed to integrate; first: {results[0]}")
    out = {}
    for name in SERIES:
        col = tag.index(SERIES_COMPARTMENT[name])
        stack = np.stack([r.values[:, col] for r in good])
        out[name] = np.quantile(stack, probs, axis=0)
    return out, len(results) - len(good)


def pseudo_r2_from_fitted(obs: ObservationSeries, fitted: Mapping[str, np.ndarray]) -> float:
    """Pooled ``1 - SS_res / SS_tot`` over every observed entry.

    ``fitted[name]`` is aligned with ``obs.days``.  ``SS_tot`` is taken about
    each series' own observed mean.
    """
    ss_res = ss_tot = 0.0
    for name in SERIES:
        mask = obs.observed[name]
        if not mask.any():
            continue
        y = obs.counts[name][mask].astype(float)
        f = np.asarray(fitted[name], dtype=float)[mask]
        ss_res += float(((y - f) ** 2).sum())
        ss_tot += float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        raise UndefinedStatisticError("observed series have zero total variance")
    return 1.0 - ss_res / ss_tot


def pseudo_r2(draws: PosteriorDraws, obs: ObservationSeries, model_tag,
              initial: StateVector, policy: VaccinationPolicy,
              max_draws: Optional[int] = 2000, threads: int = 1,
              step: float = DEFAULT_STEP) -> float:
    """Pseudo-R² of the posterior-median trajectory against ``obs``."""
    bands, _ = trajectory_quantiles(draws, model_tag, initial, policy, obs.horizon,
                                    (0.5,), max_draws, threads, step)
    fitted = {name: bands[name][0][obs.days] for name in SERIES}
    return pseudo_r2_from_fitted(obs, fitted)
