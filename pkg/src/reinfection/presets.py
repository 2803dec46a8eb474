"""Published Qatar initial conditions and posterior-mean estimates.

The transmission and waning rates (``alpha``, ``zeta1``, ``zeta2``) were
published in units of 10,000 individuals; :func:`table_parameters` divides
them by :data:`TABLE_RATE_SCALE` so the returned rates act per individual.
"""

from __future__ import annotations

from typing import Sequence

from .model import ModelTag, ParameterSet, RateSchedule, StateVector

POPULATION = 2_695_122
BED_CAPACITY = 3134
BASELINE_VACCINATION_DAY = 380
BASELINE_EFFICACY = 0.94
HORIZON = 550
SUMMARY_DAY = 540

TABLE_RATE_SCALE = 1e4

# Placeholder intervention days (day 0 = 2020-02-28).  The actual dates ship
# with the public data set and should be supplied through the config file.
DEFAULT_ALPHA_BREAKPOINTS = (17.0, 45.0, 90.0, 150.0, 220.0, 300.0, 340.0, 400.0, 460.0)
DEFAULT_GAMMA1_BREAKPOINTS = (90.0, 220.0, 400.0)
DEFAULT_PHI_BREAKPOINTS = (150.0, 300.0, 400.0)

TABLE2 = {
    ModelTag.M1: {
        "alpha": (0.00286, 0.00084, 0.00091, 0.00076, 0.00110,
                  0.00089, 0.00086, 0.00097, 0.00112, 0.00132),
        "beta": 0.06988,
        "gamma1": (0.09097, 0.13564, 0.14758, 0.11333),
        "phi": (0.00538, 0.01187, 0.02213, 0.00740),
        "gamma2": 0.14295,
        "mu": 0.00460,
        "kappa": 0.94,
        "eta": 0.00021,
        "zeta1": 0.00202,
        "zeta2": 0.00119,
        "pseudo_r2": 0.99176,
    },
    ModelTag.M2: {
        "alpha": (0.00314, 0.00089, 0.00089, 0.00077, 0.00110,
                  0.00090, 0.00087, 0.00098, 0.00114, 0.00135),
        "beta": 0.07270,
        "gamma1": (0.11527, 0.13595, 0.15138, 0.11501),
        "phi": (0.01885, 0.01978, 0.02315, 0.01149),
        "gamma2": 0.14286,
        "mu": 0.00462,
        "kappa": 0.94,
        "eta": 0.00021,
        "zeta1": 0.05374,
        "zeta2": 0.00359,
        "pseudo_r2": 0.99160,
    },
}

# Reported Bayes factor of Model 1 over Model 2.
PUBLISHED_BAYES_FACTOR = 50013.35


def table_initial_state(model_tag, population: float = POPULATION,
                        s2_fraction: float = 1 / 6) -> StateVector:
    """Day-0 state: whole population susceptible, 5 exposed, 1 infected."""
    tag = ModelTag.parse(model_tag)
    first = "S1" if tag is ModelTag.M1 else "S"
    mapping = {first: population, "E": 5.0, "I": 1.0}
    if tag is ModelTag.M1:
        mapping["S2"] = population * s2_fraction
    return StateVector.from_mapping(tag, mapping)


def table_parameters(model_tag,
                     alpha_breakpoints: Sequence[float] = DEFAULT_ALPHA_BREAKPOINTS,
                     gamma1_breakpoints: Sequence[float] = DEFAULT_GAMMA1_BREAKPOINTS,
                     phi_breakpoints: Sequence[float] = DEFAULT_PHI_BREAKPOINTS,
                     ) -> ParameterSet:
    """Posterior means for one model, converted to per-individual rates."""
    row = TABLE2[ModelTag.parse(model_tag)]
    scale = 1.0 / TABLE_RATE_SCALE
    return ParameterSet(
        alpha=RateSchedule(tuple(alpha_breakpoints), tuple(a * scale for a in row["alpha"])),
        beta=row["beta"],
        gamma1=RateSchedule(tuple(gamma1_breakpoints), row["gamma1"]),
        gamma2=row["gamma2"],
        phi=RateSchedule(tuple(phi_breakpoints), row["phi"]),
        mu=row["mu"],
        kappa=row["kappa"],
        eta=row["eta"],
        zeta1=row["zeta1"] * scale,
        zeta2=row["zeta2"] * scale,
    )
