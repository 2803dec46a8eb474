"""Compartmental epidemic models with reinfection and vaccination, fitted by
Metropolis-Hastings, with scenario prediction, Hellinger comparison of
predictive densities and Bayes-factor model comparison."""

from .density import GridSpec, SmoothedDensity, common_grid, hellinger, kde
from .errors import ReinfectionError
from .evidence import bayes_factor, interpret_bayes_factor, log_marginal_likelihood
from .inference import (ObservationSeries, PosteriorDraws, SamplerConfig, log_likelihood,
                        log_prior, mh_sample, pseudo_r2)
from .integrate import MeanTrajectory, integrate
from .model import (ModelTag, ParameterSet, RateSchedule, StateVector, VaccinationPolicy,
                    rhs, rhs_model1, rhs_model2)
from .predictive import CANONICAL_SCENARIOS, Scenario, overload_days, posterior_predict

__all__ = [
    "CANONICAL_SCENARIOS", "GridSpec", "MeanTrajectory", "ModelTag", "ObservationSeries",
    "ParameterSet", "PosteriorDraws", "RateSchedule", "ReinfectionError", "SamplerConfig",
    "Scenario", "SmoothedDensity", "StateVector", "VaccinationPolicy", "bayes_factor",
    "common_grid", "hellinger", "integrate", "interpret_bayes_factor", "kde",
    "log_likelihood", "log_marginal_likelihood", "log_prior", "mh_sample",
    "overload_days", "posterior_predict", "pseudo_r2", "rhs", "rhs_model1", "rhs_model2",
]
