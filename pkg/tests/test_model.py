import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reinfection.errors import ModelMismatchError, ValidationError
from reinfection.model import (ModelTag, ParameterSet, RateSchedule, StateVector,
                               VaccinationPolicy, rate_at, rates_at, rhs, rhs_model1,
                               rhs_model2)
from reinfection.presets import table_parameters

M1, M2 = ModelTag.M1, ModelTag.M2


# Plain transcriptions of both equation systems, kept deliberately naive.

def oracle_m1(y, a, b, g1, g2, phi, mu, k, eta, z1, z2):
    S1, E, I, RE, RI, D, S2, II, RR, V = y
    return [
        -a * S1 * E - mu * S1,
        a * S1 * E - (b + g1 + mu) * E,
        b * E - (g1 + eta) * I,
        g1 * E - mu * RE,
        g1 * I - z1 * RI,
        eta * I,
        z1 * RI - phi * a * S2 * E + z2 * (1 - k) * V,
        phi * a * S2 * E - g2 * II,
        g2 * II,
        mu * (S1 + E + RE) - z2 * (1 - k) * V,
    ]


def oracle_m2(y, a, b, g1, g2, phi, mu, k, eta, z1, z2):
    S, E, I, RE, RI, D, II, RR, V = y
    return [
        -a * S * E - mu * S + z1 * RR + z2 * V,
        a * S * E - (b + g1 + mu) * E + a * (1 - k) * V * E,
        b * E - (g1 + eta) * I,
        g1 * E - mu * RE,
        g1 * I - a * phi * E * RI,
        eta * I,
        a * phi * E * RI - g2 * II,
        g2 * II - z1 * RR,
        mu * (S + E + RE) - z2 * V - a * (1 - k) * V * E,
    ]


def scalar_args(params, t):
    return (rate_at(params.alpha, t), params.beta, rate_at(params.gamma1, t), params.gamma2,
            rate_at(params.phi, t), params.mu, params.kappa, params.eta, params.zeta1,
            params.zeta2)


def random_state(tag, rng, scale=1e5):
    return StateVector(tag, rng.uniform(0, scale, tag.n_compartments))


# -- rate schedules -------------------------------------------------------------

def test_rate_at_interval_conventions():
    s = RateSchedule((10.0,), (2.0, 5.0))
    assert rate_at(s, 3) == 2.0
    assert rate_at(s, 10) == 5.0
    assert rate_at(s, 1e6) == 5.0
    s2 = RateSchedule((10.0, 20.0), (2.0, 5.0, 7.0))
    assert rate_at(s2, 19.999) == 5.0
    assert rate_at(s2, 20.0) == 7.0
    np.testing.assert_array_equal(rates_at(s2, np.array([0, 10, 19.999, 20, 25])),
                                  [2, 5, 5, 7, 7])


@pytest.mark.parametrize("breaks, rates", [((10.0, 5.0), (1, 2, 3)), ((1.0,), (1.0,)),
                                           ((3.0, 3.0), (1, 2, 3))])
def test_rate_schedule_rejects_bad_structure(breaks, rates):
    with pytest.raises(ValidationError):
        RateSchedule(breaks, rates)


@given(st.lists(st.floats(0.5, 50), min_size=1, max_size=6, unique=True),
       st.floats(0, 400), st.floats(0, 1))
def test_rate_at_piecewise_constant(gaps, t, frac):
    breaks = tuple(np.cumsum(gaps))
    sched = RateSchedule(breaks, tuple(range(1, len(breaks) + 2)))
    i = int(np.searchsorted(breaks, t, side="right"))
    lo = 0.0 if i == 0 else breaks[i - 1]
    hi = breaks[i] if i < len(breaks) else lo + 100.0
    u = lo + frac * (hi - lo) * 0.999
    assert rate_at(sched, t) == rate_at(sched, u) == i + 1


# -- right-hand sides -------------------------------------------------------------

@pytest.mark.parametrize("tag", [M1, M2])
def test_zero_state_has_zero_derivative(tag):
    d = rhs(tag, np.zeros(tag.n_compartments), table_parameters(tag), 5.0)
    assert np.all(d == 0)


def test_only_vaccination_flow_active():
    params = ParameterSet(alpha=0.3, beta=0.2, gamma1=0.1, gamma2=0.5, phi=0.7, mu=0.01,
                          kappa=0.94, eta=0.02, zeta1=0.03, zeta2=0.04)
    state = StateVector.from_mapping(M1, {"S1": 100.0})
    d = dict(zip(M1.compartments, rhs_model1(state, params, 0.0)))
    assert d["S1"] == pytest.approx(-1.0, rel=1e-15)
    assert d["V"] == pytest.approx(1.0, rel=1e-15)
    assert all(v == 0 for k, v in d.items() if k not in ("S1", "V"))


@pytest.mark.parametrize("tag, oracle", [(M1, oracle_m1), (M2, oracle_m2)])
@pytest.mark.parametrize("t", [0.0, 50.0, 100.0, 389.5, 549.0])
def test_rhs_matches_independent_transcription(tag, oracle, t):
    rng = np.random.default_rng(int(t) + 7)
    params = table_parameters(tag)
    for _ in range(20):
        state = random_state(tag, rng)
        got = rhs(tag, state, params, t)
        want = np.array(oracle(state.values.tolist(), *scalar_args(params, t)))
        scale = np.abs(want).max()
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12 * scale)
        flows = np.abs(got).sum()
        assert abs(got.sum()) <= 1e-12 * flows


def test_full_efficacy_removes_vaccine_exposure_terms():
    params = table_parameters(M2).replace(kappa=1.0)
    rng = np.random.default_rng(3)
    state = random_state(M2, rng)
    base = rhs_model2(state, params, 10.0)
    bumped = state.values.copy()
    bumped[M2.index("V")] *= 3.0
    moved = rhs_model2(bumped, params, 10.0)
    e = M2.index("E")
    assert moved[e] == base[e]
    # V still changes dV through the linear waning term only
    v = M2.index("V")
    dv_expected = base[v] - params.zeta2 * (bumped[v] - state.values[v])
    assert moved[v] == pytest.approx(dv_expected, rel=1e-12)


def test_dimension_and_model_mismatch():
    params = table_parameters(M1)
    with pytest.raises(ModelMismatchError):
        rhs_model1(np.zeros(9), params, 0.0)
    with pytest.raises(ModelMismatchError):
        rhs_model2(StateVector(M1, np.zeros(10)), params, 0.0)


def _params_strategy():
    rate = st.floats(0.0, 2.0)
    small = st.floats(0.0, 1e-4)
    return st.builds(
        lambda a, b, g1, g2, phi, mu, k, eta, z1, z2: ParameterSet(
            alpha=a, beta=b, gamma1=g1, gamma2=g2, phi=phi, mu=mu, kappa=k, eta=eta,
            zeta1=z1, zeta2=z2),
        small, rate, rate, rate, rate, rate, st.floats(0.01, 1.0), rate, rate, rate,
    )


@pytest.mark.parametrize("tag", [M1, M2])
@given(params=_params_strategy(),
       values=st.lists(st.floats(0, 1e6), min_size=10, max_size=10))
def test_conservation_property(tag, params, values):
    state = np.array(values[:tag.n_compartments])
    d = rhs(tag, state, params, 0.0)
    flows = np.abs(d).sum()
    assert abs(d.sum()) <= 1e-12 * max(flows, 1e-300)


@given(params=_params_strategy(),
       values=st.lists(st.floats(0, 1e6), min_size=10, max_size=10))
def test_model1_reinfection_block_stays_empty_without_feeders(params, values):
    params = params.replace(phi=RateSchedule.constant(0.0), zeta1=0.0, zeta2=0.0)
    state = np.array(values)
    for name in ("S2", "II", "RR"):
        state[M1.index(name)] = 0.0
    d = dict(zip(M1.compartments, rhs_model1(state, params, 0.0)))
    assert d["S2"] == d["II"] == d["RR"] == 0.0


# -- value types -------------------------------------------------------------------

def test_state_vector_validation():
    with pytest.raises(ModelMismatchError):
        StateVector(M1, np.zeros(9))
    with pytest.raises(ValidationError):
        StateVector(M2, np.r_[-1.0, np.zeros(8)])
    StateVector(M2, np.r_[-1e-10, np.zeros(8)])  # transient undershoot tolerated
    s = StateVector.from_mapping(M1, {"S1": 5.0, "V": 2.0})
    assert s["S1"] == 5.0 and s.total == 7.0
    with pytest.raises((ValidationError, ModelMismatchError)):
        StateVector.from_mapping(M2, {"S1": 1.0})


def test_parameter_vector_round_trip():
    params = table_parameters(M1)
    again = params.from_vector(params.to_vector())
    assert again == params
    assert params.names()[:3] == ["alpha_0", "alpha_1", "alpha_2"]
    assert len(params.names()) == 10 + 1 + 4 + 1 + 4 + 5


@pytest.mark.parametrize("change", [{"beta": -0.1}, {"kappa": 0.0}, {"kappa": 1.5},
                                    {"eta": math.nan}])
def test_parameter_check(change):
    with pytest.raises(ValidationError):
        table_parameters(M2).replace(**change).check()


def test_policy_efficacy_override():
    params = table_parameters(M1)
    assert VaccinationPolicy(380).effective_kappa(params) == 0.94
    assert VaccinationPolicy(380, 1.0).effective_kappa(params) == 1.0
    with pytest.raises(ValidationError):
        VaccinationPolicy(-1)
