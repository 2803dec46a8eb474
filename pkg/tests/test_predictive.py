import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinfection.errors import InstabilityError, ValidationError
from reinfection.inference import PosteriorDraws
from reinfection.integrate import integrate
from reinfection.model import ModelTag, VaccinationPolicy
from reinfection.predictive import (CANONICAL_SCENARIOS, Scenario, baseline_policy,
                                    cumulative_at_day, get_scenario, overload_days,
                                    posterior_predict, simulate_draw, summarize_scenario)
from reinfection.presets import TABLE2, table_initial_state, table_parameters

M1, M2 = ModelTag.M1, ModelTag.M2
HORIZON = 550


def table_draws(tag, n=6, unstable=()):
    base = table_parameters(tag)
    rows = []
    for i, b in enumerate(np.linspace(0.9, 1.1, n) * base.beta):
        p = base.replace(beta=float(b))
        if i in unstable:
            p = p.replace(alpha=p.alpha.with_rates(TABLE2[tag]["alpha"]))
        rows.append(p.to_vector())
    return PosteriorDraws(base, np.array(rows), np.zeros(n), ("beta",))


@pytest.fixture(scope="module")
def m1_draws():
    return table_draws(M1)


def test_canonical_scenarios():
    grid = {(s.policy.start_day, s.policy.efficacy_override) for s in CANONICAL_SCENARIOS.values()}
    assert grid == {(380, 0.94), (380, 1.0), (200, 0.94), (450, 0.94), (200, 1.0), (450, 1.0)}
    assert get_scenario(3).policy.start_day == 200
    assert get_scenario(1).policy == baseline_policy()
    with pytest.raises(ValidationError):
        get_scenario(7)


def test_zero_rate_draw_samples_near_zero_counts():
    x0 = table_initial_state(M2)
    params = table_parameters(M2).replace(
        alpha=0.0, beta=0.0, gamma1=0.0, gamma2=0.0, phi=0.0, mu=0.0, eta=0.0,
        zeta1=0.0, zeta2=0.0)
    sample = simulate_draw(params, M2, x0, baseline_policy(), HORIZON, seed=1, index=0)
    assert np.all(sample.reinfected == 0)
    assert np.all(sample.deaths == 0)
    assert np.all(sample.cumulative_reinfected == 0)
    # I stays at its initial value of 1; cumulative infections stay at 1
    assert np.all(sample.mean_infected == 1.0)
    assert np.all(sample.cumulative_infected == 1)
    for kind in ("infected", "reinfected", "deaths"):
        vals = cumulative_at_day([sample], 400, kind)
        assert vals[0] == cumulative_at_day([sample], 0, kind)[0]


def test_scenario_one_reproduces_the_fit_trajectory(m1_draws):
    x0 = table_initial_state(M1)
    result = posterior_predict(m1_draws, get_scenario(1), M1, x0, HORIZON, seed=3,
                               keep_trajectory=True)
    for sample in result:
        fit = integrate(M1, x0, m1_draws.parameter_set(sample.draw_index),
                        baseline_policy(), HORIZON)
        np.testing.assert_array_equal(sample.trajectory.values, fit.values)
        np.testing.assert_array_equal(sample.mean_infected, fit.series("I"))
    again = posterior_predict(m1_draws, Scenario(9, baseline_policy()), M1, x0, HORIZON, seed=3)
    for a, b in zip(result, again):
        np.testing.assert_array_equal(a.infected, b.infected)
        np.testing.assert_array_equal(a.deaths, b.deaths)


def test_day_zero_holds_initial_conditions(m1_draws):
    x0 = table_initial_state(M1)
    result = posterior_predict(m1_draws, get_scenario(4), M1, x0, HORIZON, seed=0)
    assert np.all(cumulative_at_day(result, 0, "deaths") == 0)
    assert np.all(cumulative_at_day(result, 0, "reinfected") == 0)
    assert np.all(cumulative_at_day(result, 0, "infected") == 1)
    with pytest.raises(ValidationError):
        cumulative_at_day(result, HORIZON + 1, "deaths")
    with pytest.raises(ValidationError):
        cumulative_at_day(result, 10, "recovered")


def test_cumulative_paths_never_decrease(m1_draws):
    x0 = table_initial_state(M1)
    for sid in (1, 3, 6):
        for s in posterior_predict(m1_draws, get_scenario(sid), M1, x0, HORIZON, seed=sid):
            assert np.all(np.diff(s.deaths) >= 0)
            assert np.all(np.diff(s.cumulative_infected) >= 0)
            assert np.all(np.diff(s.cumulative_reinfected) >= 0)
            assert np.all(s.infected >= 0) and np.all(s.reinfected >= 0)


@settings(max_examples=25, deadline=None)
@given(d1=st.integers(0, HORIZON), d2=st.integers(0, HORIZON))
def test_cumulative_monotone_in_day(m1_draws, d1, d2):
    lo, hi = sorted((d1, d2))
    samples = _cached_samples(m1_draws)
    for kind in ("infected", "reinfected", "deaths"):
        assert np.all(cumulative_at_day(samples, lo, kind) <= cumulative_at_day(samples, hi, kind))


_CACHE = {}


def _cached_samples(draws):
    if "s" not in _CACHE:
        _CACHE["s"] = posterior_predict(draws, get_scenario(1), M1, table_initial_state(M1),
                                        HORIZON, seed=4).samples
    return _CACHE["s"]


def test_overload_examples(m1_draws):
    samples = _cached_samples(m1_draws)
    assert np.all(overload_days(samples, 1e12).sampled == 0)
    assert np.all(overload_days(samples, 1e12).mean == 0)
    zero = overload_days(samples, 0.0)
    assert np.all(zero.mean == HORIZON)
    with pytest.raises(ValidationError):
        overload_days(samples, -1.0)


@settings(max_examples=25, deadline=None)
@given(t1=st.floats(0, 5e5), t2=st.floats(0, 5e5))
def test_overload_monotone_in_threshold(m1_draws, t1, t2):
    lo, hi = sorted((t1, t2))
    samples = _cached_samples(m1_draws)
    a, b = overload_days(samples, lo), overload_days(samples, hi)
    assert np.all(a.sampled >= b.sampled) and np.all(a.mean >= b.mean)


def test_failed_draws_are_excluded_and_counted():
    draws = table_draws(M2, n=5, unstable=(1, 3))
    x0 = table_initial_state(M2)
    result = posterior_predict(draws, get_scenario(1), M2, x0, HORIZON, seed=2)
    assert len(result) == 3 and result.n_failed == 2
    assert [i for i, _ in result.failed] == [1, 3]
    summary = summarize_scenario(draws, get_scenario(1), M2, x0, HORIZON, 2, 3134, 540)
    assert summary.draw_index.tolist() == [0, 2, 4]
    assert len(summary.failed) == 2
    with pytest.raises(InstabilityError):
        summarize_scenario(table_draws(M2, n=2, unstable=(0, 1)), get_scenario(1), M2, x0,
                           HORIZON, 2, 3134, 540)


def test_results_independent_of_threads_and_batch():
    draws = table_draws(M2, n=8, unstable=(5,))
    x0 = table_initial_state(M2)
    args = (get_scenario(3), M2, x0, HORIZON, 11, 3134.0, 540)
    a = summarize_scenario(draws, *args, threads=1)
    b = summarize_scenario(draws, *args, threads=3)
    for name in ("draw_index", "overload_sampled", "overload_mean", "infected",
                 "reinfected", "deaths"):
        np.testing.assert_array_equal(a.column(name), b.column(name))
    # a draw's sample does not depend on which other draws are simulated
    single = simulate_draw(draws.parameter_set(6), M2, x0, get_scenario(3).policy,
                           HORIZON, 11, 6)
    assert single.deaths[540] == a.deaths[list(a.draw_index).index(6)]


def test_scenario_start_past_horizon_is_rejected(m1_draws):
    with pytest.raises(ValidationError):
        posterior_predict(m1_draws, get_scenario(4), M1, table_initial_state(M1), 300, 0)


def test_late_vaccination_raises_deaths_for_table_parameters():
    # the directional claim, checked on the mean trajectories of the table values
    x0 = table_initial_state(M1)
    params = table_parameters(M1)
    early = integrate(M1, x0, params, get_scenario(3).policy, HORIZON)
    late = integrate(M1, x0, params, get_scenario(4).policy, HORIZON)
    assert late.series("D")[540] > early.series("D")[540]
    full = integrate(M1, x0, params, VaccinationPolicy(380, 1.0), HORIZON)
    base = integrate(M1, x0, params, baseline_policy(), HORIZON)
    assert full.cumulative_reinfections[540] <= base.cumulative_reinfections[540]
