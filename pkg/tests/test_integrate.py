import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinfection.errors import InstabilityError, ModelMismatchError, ValidationError
from reinfection.integrate import batch_integrate, integrate
from reinfection.model import ModelTag, ParameterSet, RateSchedule, StateVector, VaccinationPolicy
from reinfection.presets import (POPULATION, TABLE2, table_initial_state, table_parameters)
from reinfection.predictive import baseline_policy

M1, M2 = ModelTag.M1, ModelTag.M2

ZERO = ParameterSet(alpha=0.0, beta=0.0, gamma1=0.0, gamma2=0.0, phi=0.0, mu=0.0,
                    kappa=0.94, eta=0.0, zeta1=0.0, zeta2=0.0)


@pytest.mark.parametrize("tag", [M1, M2])
def test_zero_rates_give_constant_trajectory(tag):
    rng = np.random.default_rng(0)
    x0 = StateVector(tag, rng.uniform(0, 1000, tag.n_compartments))
    traj = integrate(tag, x0, ZERO, VaccinationPolicy(0), 550)
    assert traj.values.shape == (551, tag.n_compartments)
    assert np.all(traj.values == x0.values)


def test_vaccination_only_matches_exponential_decay():
    x0 = StateVector.from_mapping(M1, {"S1": 1000.0})
    traj = integrate(M1, x0, ZERO.replace(mu=0.01), VaccinationPolicy(0), 100)
    expected = 1000.0 * np.exp(-0.01 * np.arange(101))
    np.testing.assert_allclose(traj.series("S1"), expected, rtol=1e-9)
    assert traj.series("S1")[100] == pytest.approx(1000 * math.exp(-1.0), rel=1e-6)
    np.testing.assert_allclose(traj.series("V"), 1000.0 - expected, rtol=1e-9)


def test_vaccination_switches_on_at_start_day():
    x0 = StateVector.from_mapping(M1, {"S1": 1000.0})
    traj = integrate(M1, x0, ZERO.replace(mu=0.01), VaccinationPolicy(30), 60)
    s1 = traj.series("S1")
    assert np.all(s1[:31] == 1000.0)
    np.testing.assert_allclose(s1[30:], 1000 * np.exp(-0.01 * np.arange(31)), rtol=1e-9)


def test_breakpoint_between_steps_is_honoured_exactly():
    # E decays at rate gamma1 alone; gamma1 jumps at day 10.55, off the 0.1 grid
    params = ZERO.replace(gamma1=RateSchedule((10.55,), (0.01, 0.03)))
    x0 = StateVector.from_mapping(M2, {"E": 500.0})
    traj = integrate(M2, x0, params, VaccinationPolicy(0), 30)
    t = np.arange(31.0)
    rate = np.where(t < 10.55, 0.01 * t, 0.01 * 10.55 + 0.03 * (t - 10.55))
    np.testing.assert_allclose(traj.series("E"), 500 * np.exp(-rate), rtol=1e-9)


def test_efficacy_override_replaces_kappa():
    tag = M1
    x0 = table_initial_state(tag)
    params = table_parameters(tag)
    a = integrate(tag, x0, params.replace(kappa=1.0), VaccinationPolicy(380), 550)
    b = integrate(tag, x0, params, VaccinationPolicy(380, 1.0), 550)
    np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.parametrize("tag", [M1, M2])
def test_table_parameters_conserve_population(tag):
    x0 = table_initial_state(tag)
    traj = integrate(tag, x0, table_parameters(tag), baseline_policy(), 550)
    expected = POPULATION + 6.0 + (POPULATION / 6 if tag is M1 else 0.0)
    assert x0.total == pytest.approx(expected, rel=1e-15)
    np.testing.assert_allclose(traj.totals(), expected, rtol=1e-6)
    assert np.abs(traj.totals() / expected - 1).max() < 1e-12


@pytest.mark.parametrize("tag", [M1, M2])
def test_deaths_and_cumulative_counts_never_decrease(tag):
    traj = integrate(tag, table_initial_state(tag), table_parameters(tag), baseline_policy(), 550)
    assert np.all(np.diff(traj.series("D")) >= 0)
    assert np.all(np.diff(traj.cumulative_infections) >= 0)
    assert np.all(np.diff(traj.cumulative_reinfections) >= 0)
    if tag is M1:
        assert np.all(np.diff(traj.series("RR")) >= 0)
    assert traj.cumulative_infections[0] == 1.0


def test_cumulative_infections_track_exposed_outflow():
    # beta only: every E -> I transfer is a new infection, nothing leaves I
    params = ZERO.replace(beta=0.2)
    x0 = StateVector.from_mapping(M2, {"E": 100.0, "I": 3.0})
    traj = integrate(M2, x0, params, VaccinationPolicy(0), 40)
    np.testing.assert_allclose(traj.cumulative_infections, traj.series("I"), rtol=1e-12)


@pytest.mark.parametrize("tag", [M1, M2])
def test_unscaled_table_rates_raise_instability(tag):
    row = TABLE2[tag]
    params = table_parameters(tag)
    raw = params.replace(alpha=params.alpha.with_rates(row["alpha"]))
    with pytest.raises(InstabilityError) as info:
        integrate(tag, table_initial_state(tag), raw, baseline_policy(), 550)
    err = info.value
    assert err.compartment in tag.compartments
    assert err.day < 1.0
    assert err.value < -1e-6 or not math.isfinite(err.value)


def test_input_validation():
    x0 = table_initial_state(M1)
    params = table_parameters(M1)
    # a start day past the horizon just means no vaccination in the window
    late = integrate(M1, x0, params, VaccinationPolicy(600), 300)
    assert np.all(late.series("V") == 0)
    with pytest.raises(ValidationError):
        integrate(M1, x0, params, baseline_policy(), 0)
    with pytest.raises(ModelMismatchError):
        integrate(M2, x0, params, baseline_policy(), 10)
    with pytest.raises(ValidationError):
        integrate(M1, x0, params.replace(beta=-1.0), baseline_policy(), 10)


def test_batch_integrate_is_ordered_and_thread_independent():
    tag = M2
    policy = VaccinationPolicy(100)
    x0 = table_initial_state(tag)
    base = table_parameters(tag)
    params = [base.replace(beta=b) for b in np.linspace(0.05, 0.2, 12)]
    row = TABLE2[tag]
    params.insert(5, base.replace(alpha=base.alpha.with_rates(row["alpha"])))
    serial = batch_integrate(tag, x0, params, policy, 200, threads=1)
    parallel = batch_integrate(tag, x0, params, policy, 200, threads=4)
    assert isinstance(serial[5], InstabilityError)
    assert isinstance(parallel[5], InstabilityError)
    for a, b, p in zip(serial, parallel, params):
        if isinstance(a, Exception):
            continue
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(
            a.values, integrate(tag, x0, p, policy, 200).values)


@settings(max_examples=30)
@given(beta=st.floats(0.01, 0.5), gamma=st.floats(0.01, 0.5), eta=st.floats(0, 0.05),
       mu=st.floats(0, 0.05), start=st.integers(0, 100))
def test_population_conserved_for_random_rates(beta, gamma, eta, mu, start):
    params = table_parameters(M2).replace(beta=beta, gamma1=RateSchedule.constant(gamma),
                                          eta=eta, mu=mu)
    params = params.replace(alpha=RateSchedule.constant(1e-7))
    x0 = StateVector.from_mapping(M2, {"S": 1e6, "E": 20.0, "I": 5.0})
    traj = integrate(M2, x0, params, VaccinationPolicy(start), 120)
    np.testing.assert_allclose(traj.totals(), x0.total, rtol=1e-12)
    assert np.all(traj.values >= 0)
