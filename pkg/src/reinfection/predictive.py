"""Posterior-predictive simulation of the vaccination scenarios.

Each posterior draw is integrated under a scenario's vaccination policy and
Poisson noise is added around the mean trajectory.  Active counts (infected,
reinfected) get an independent draw per day.  Cumulative counts (deaths,
cumulative infections and reinfections) are built from Poisson increments of
the mean, which keeps every sampled path non-decreasing while each day's
marginal stays Poisson around the mean.  Day 0 holds the initial condition.

Per-draw random streams come from ``SeedSequence(seed, spawn_key=(index,))``
so results do not depend on thread count or scheduling.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import InstabilityError, ValidationError
from .inference import LAMBDA_FLOOR, PosteriorDraws
from .integrate import DEFAULT_STEP, MeanTrajectory, integrate
from .model import ParameterSet, StateVector, VaccinationPolicy
from .presets import BASELINE_EFFICACY, BASELINE_VACCINATION_DAY

log = logging.getLogger(__name__)

CUMULATIVE_KINDS = ("infected", "reinfected", "deaths")


@dataclass(frozen=True)
class Scenario:
    id: int
    policy: VaccinationPolicy
    label: str = ""


CANONICAL_SCENARIOS = {
    1: Scenario(1, VaccinationPolicy(380, 0.94), "vaccine day 380, 94% efficacy"),
    2: Scenario(2, VaccinationPolicy(380, 1.00), "vaccine day 380, 100% efficacy"),
    3: Scenario(3, VaccinationPolicy(200, 0.94), "early vaccine day 200, 94% efficacy"),
    4: Scenario(4, VaccinationPolicy(450, 0.94), "late vaccine day 450, 94% efficacy"),
    5: Scenario(5, VaccinationPolicy(200, 1.00), "early vaccine day 200, 100% efficacy"),
    6: Scenario(6, VaccinationPolicy(450, 1.00), "late vaccine day 450, 100% efficacy"),
}


def baseline_policy() -> VaccinationPolicy:
    """Policy the data were fitted under (vaccines from day 380, 94% efficacy)."""
    return VaccinationPolicy(BASELINE_VACCINATION_DAY, BASELINE_EFFICACY)


def get_scenario(scenario_id: int) -> Scenario:
    try:
        return CANONICAL_SCENARIOS[int(scenario_id)]
    except (KeyError, ValueError):
        raise ValidationError(f"unknown scenario {scenario_id!r}; expected 1-6") from None


@dataclass
class PredictiveSample:
    """Sampled daily counts for one posterior draw under one scenario."""

    draw_index: int
    seed: tuple[int, int]
    infected: np.ndarray
    reinfected: np.ndarray
    deaths: np.ndarray
    cumulative_infected: np.ndarray
    cumulative_reinfected: np.ndarray
    mean_infected: np.ndarray
    mean_deaths: np.ndarray
    mean_cumulative_infected: np.ndarray
    mean_cumulative_reinfected: np.ndarray
    trajectory: Optional[MeanTrajectory] = None

    @property
    def horizon(self) -> int:
        return self.infected.size - 1

    def cumulative(self, kind: str, mean: bool = False) -> np.ndarray:
        if kind not in CUMULATIVE_KINDS:
            raise ValidationError(f"unknown cumulative series {kind!r}")
        if mean:
            return {"infected": self.mean_cumulative_infected,
                    "reinfected": self.mean_cumulative_reinfected,
                    "deaths": self.mean_deaths}[kind]
        return {"infected": self.cumulative_infected,
                "reinfected": self.cumulative_reinfected,
                "deaths": self.deaths}[kind]


@dataclass
class PredictiveResult:
    scenario: Scenario
    samples: list[PredictiveSample]
    failed: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return len(self.failed)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[PredictiveSample]:
        return iter(self.samples)


def draw_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _independent(lam: np.ndarray, start: float, rng) -> np.ndarray:
    out = np.empty(lam.size, dtype=np.int64)
    out[0] = round(start)
    out[1:] = rng.poisson(np.maximum(lam[1:], LAMBDA_FLOOR))
    return out


def _cumulative(lam: np.ndarray, start: float, rng) -> np.ndarray:
    steps = np.maximum(np.diff(lam), LAMBDA_FLOOR)
    out = np.empty(lam.size, dtype=np.int64)
    out[0] = round(start)
    out[1:] = out[0] + np.cumsum(rng.poisson(steps))
    return out


def simulate_draw(params: ParameterSet, model_tag, initial: StateVector,
                  policy: VaccinationPolicy, horizon: int, seed: int, index: int,
                  keep_trajectory: bool = False,
                  step: float = DEFAULT_STEP) -> PredictiveSample:
    """Integrate one draw and sample its observable counts."""
    traj = integrate(model_tag, initial, params, policy, horizon, step)
    rng = draw_rng(seed, index)
    lam_i = traj.series("I")
    lam_ii = traj.series("II")
    lam_d = traj.series("D")
    cum_inf = traj.cumulative_infections
    cum_re = traj.cumulative_reinfections
    return PredictiveSample(
        draw_index=int(index),
        seed=(int(seed), int(index)),
        infected=_independent(lam_i, lam_i[0], rng),
        reinfected=_independent(lam_ii, lam_ii[0], rng),
        deaths=_cumulative(lam_d, lam_d[0], rng),
        cumulative_infected=_cumulative(cum_inf, cum_inf[0], rng),
        cumulative_reinfected=_cumulative(cum_re, cum_re[0], rng),
        mean_infected=lam_i.copy(),
        mean_deaths=lam_d.copy(),
        mean_cumulative_infected=cum_inf.copy(),
        mean_cumulative_reinfected=cum_re.copy(),
        trajectory=traj if keep_trajectory else None,
    )


def _iter_samples(draws: PosteriorDraws, indices: Sequence[int], scenario: Scenario,
                  model_tag, initial, horizon, seed, threads, keep_trajectory, step):
    if scenario.policy.start_day > horizon:
        raise ValidationError(
            f"scenario {scenario.id} starts vaccinating on day {scenario.policy.start_day}, "
            f"past the horizon {horizon}"
        )
    def one(i):
        try:
            return simulate_draw(draws.parameter_set(i), model_tag, initial,
                                 scenario.policy, horizon, seed, i, keep_trajectory, step)
        except (InstabilityError, ValidationError) as exc:
            return (int(i), str(exc))

    if threads <= 1:
        yield from map(one, indices)
        return
    chunk = 256 * threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, len(indices), chunk):
            yield from pool.map(one, indices[start:start + chunk])


def posterior_predict(draws: PosteriorDraws, scenario: Scenario, model_tag,
                      initial: StateVector, horizon: int, seed: int,
                      threads: int = 1, max_draws: Optional[int] = None,
                      keep_trajectory: bool = False,
                      step: float = DEFAULT_STEP) -> PredictiveResult:
    """Posterior-predictive samples of one scenario, one per (thinned) draw.

    Draws whose integration fails are excluded and listed in ``failed``.
    """
    indices = draws.thin_indices(max_draws)
    samples, failed = [], []
    for item in _iter_samples(draws, indices, scenario, model_tag, initial,
                              horizon, seed, threads, keep_trajectory, step):
        if isinstance(item, PredictiveSample):
            samples.append(item)
        else:
            failed.append(item)
    if failed:
        log.warning("scenario %d: %d draws failed to integrate", scenario.id, len(failed))
    return PredictiveResult(scenario, samples, failed)


@dataclass
class OverloadSummary:
    """Days with active infections above a bed threshold, per draw."""

    threshold: float
    sampled: np.ndarray
    mean: np.ndarray

    @property
    def sampled_range(self) -> tuple[int, int]:
        return int(self.sampled.min()), int(self.sampled.max())

    @property
    def mean_range(self) -> tuple[int, int]:
        return int(self.mean.min()), int(self.mean.max())


def _overload(series: np.ndarray, threshold: float) -> int:
    # day 0 is the known initial condition, not a prediction
    return int(np.count_nonzero(series[1:] > threshold))


def overload_days(samples: Iterable[PredictiveSample], threshold: float) -> OverloadSummary:
    """Count, per draw, the days on which active infections exceed ``threshold``.

    Both the Poisson-sampled counts and the mean trajectory are counted;
    the min-max envelope of each is available on the result.
    """
    if threshold < 0:
        raise ValidationError(f"threshold must be >= 0, got {threshold}")
    samples = list(samples)
    if not samples:
        raise ValidationError("no predictive samples")
    sampled = np.array([_overload(s.infected, threshold) for s in samples], dtype=np.int64)
    mean = np.array([_overload(s.mean_infected, threshold) for s in samples], dtype=np.int64)
    return OverloadSummary(float(threshold), sampled, mean)


def cumulative_at_day(samples: Iterable[PredictiveSample], day: int, series: str,
                      mean: bool = False) -> np.ndarray:
    """Per-draw cumulative infections, reinfections or deaths on ``day``."""
    if series not in CUMULATIVE_KINDS:
        raise ValidationError(f"series must be one of {CUMULATIVE_KINDS}, got {series!r}")
    samples = list(samples)
    out = []
    for s in samples:
        if not 0 <= day <= s.horizon:
            raise ValidationError(f"day {day} outside 0..{s.horizon}")
        out.append(s.cumulative(series, mean)[day])
    return np.array(out, dtype=float if mean else np.int64)


@dataclass
class ScenarioSummary:
    """Per-draw scenario outcomes, the payload of a predictive CSV."""

    scenario: Scenario
    threshold: float
    day: int
    draw_index: np.ndarray
    overload_sampled: np.ndarray
    overload_mean: np.ndarray
    infected: np.ndarray
    reinfected: np.ndarray
    deaths: np.ndarray
    failed: list[tuple[int, str]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    @property
    def overload_range(self) -> tuple[int, int]:
        return int(self.overload_sampled.min()), int(self.overload_sampled.max())

    @property
    def overload_mean_range(self) -> tuple[int, int]:
        return int(self.overload_mean.min()), int(self.overload_mean.max())


def summarize_scenario(draws: PosteriorDraws, scenario: Scenario, model_tag,
                       initial: StateVector, horizon: int, seed: int,
                       threshold: float, day: int, threads: int = 1,
                       max_draws: Optional[int] = None,
                       step: float = DEFAULT_STEP) -> ScenarioSummary:
    """Stream a scenario over the draws, keeping only the per-draw summary."""
    if not 0 <= day <= horizon:
        raise ValidationError(f"day {day} outside 0..{horizon}")
    if threshold < 0:
        raise ValidationError(f"threshold must be >= 0, got {threshold}")
    indices = draws.thin_indices(max_draws)
    rows, failed = [], []
    for item in _iter_samples(draws, indices, scenario, model_tag, initial,
                              horizon, seed, threads, False, step):
        if not isinstance(item, PredictiveSample):
            failed.append(item)
            continue
        rows.append((item.draw_index,
                     _overload(item.infected, threshold),
                     _overload(item.mean_infected, threshold),
                     item.cumulative_infected[day],
                     item.cumulative_reinfected[day],
                     item.deaths[day]))
    if not rows:
        raise InstabilityError(float("nan"), "all", float("nan"),
                               f"every posterior draw failed to integrate; first: {failed[0][1]}")
    cols = np.array(rows, dtype=np.int64).T
    if failed:
        log.warning("scenario %d: %d draws failed to integrate", scenario.id, len(failed))
    return ScenarioSummary(scenario, float(threshold), int(day), *cols, failed=failed)
