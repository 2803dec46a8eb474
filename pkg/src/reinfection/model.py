"""Compartment states, parameters and right-hand sides of the two models.

Model 1 (``M1``) keeps a second susceptible pool ``S2`` fed by waning natural
and vaccine immunity; reinfection draws from ``S2``.  Model 2 (``M2``) has a
single susceptible pool and reinfects recovered individuals directly.

All flows are transfers between compartments, so each derivative vector sums
to zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import ModelMismatchError, ValidationError


class ModelTag(str, enum.Enum):
    M1 = "M1"
    M2 = "M2"

    @property
    def compartments(self) -> tuple[str, ...]:
        return COMPARTMENTS[self]

    @property
    def n_compartments(self) -> int:
        return len(COMPARTMENTS[self])

    def index(self, name: str) -> int:
        return COMPARTMENTS[self].index(name)

    @classmethod
    def parse(cls, value) -> "ModelTag":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        aliases = {"1": "M1", "MODEL1": "M1", "2": "M2", "MODEL2": "M2"}
        text = aliases.get(text, text)
        try:
            return cls(text)
        except ValueError:
            raise ModelMismatchError(f"unknown model tag {value!r}") from None


COMPARTMENTS = {
    ModelTag.M1: ("S1", "E", "I", "RE", "RI", "D", "S2", "II", "RR", "V"),
    ModelTag.M2: ("S", "E", "I", "RE", "RI", "D", "II", "RR", "V"),
}

# Tolerated transient undershoot of a stored state.
STATE_FLOOR = -1e-9


@dataclass(frozen=True)
class StateVector:
    """Occupancies of every compartment of one model at one time."""

    model_tag: ModelTag
    values: np.ndarray

    def __post_init__(self):
        tag = ModelTag.parse(self.model_tag)
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size != tag.n_compartments:
            raise ModelMismatchError(
                f"{tag.value} expects {tag.n_compartments} compartments, "
                f"got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("state contains non-finite values")
        low = np.flatnonzero(values < STATE_FLOOR)
        if low.size:
            name = tag.compartments[low[0]]
            raise ValidationError(f"compartment {name} is negative ({values[low[0]]})")
        values.setflags(write=False)
        object.__setattr__(self, "model_tag", tag)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, model_tag, mapping) -> "StateVector":
        tag = ModelTag.parse(model_tag)
        unknown = set(mapping) - set(tag.compartments)
        if unknown:
            raise ModelMismatchError(
                f"compartments {sorted(unknown)} do not exist in {tag.value}"
            )
        return cls(tag, [float(mapping.get(name, 0.0)) for name in tag.compartments])

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.model_tag.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.model_tag.compartments, self.values)}

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class RateSchedule:
    """Piecewise-constant rate: ``rates[i]`` applies on ``[breakpoints[i-1], breakpoints[i])``.

    The first rate also covers everything before the first breakpoint and the
    last rate persists past the final one.
    """

    breakpoints: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        rates = tuple(float(r) for r in self.rates)
        if len(rates) != len(bps) + 1:
            raise ValidationError(
                f"{len(bps)} breakpoints need {len(bps) + 1} rates, got {len(rates)}"
            )
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValidationError(f"breakpoints must be strictly increasing: {bps}")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def constant(cls, rate: float) -> "RateSchedule":
        return cls((), (rate,))

    def __len__(self) -> int:
        return len(self.rates)

    def with_rates(self, rates: Sequence[float]) -> "RateSchedule":
        return RateSchedule(self.breakpoints, tuple(rates))


def rate_at(schedule: RateSchedule, t: float) -> float:
    """Rate in force at day ``t`` (left-closed, right-open segments)."""
    idx = 0
    for bp in schedule.breakpoints:
        if t >= bp:
            idx += 1
        else:
            break
    return schedule.rates[idx]


def rates_at(schedule: RateSchedule, times: np.ndarray) -> np.ndarray:
    """Vectorised :func:`rate_at`."""
    idx = np.searchsorted(np.asarray(schedule.breakpoints), times, side="right")
    return np.asarray(schedule.rates)[idx]


SCALAR_NAMES = ("beta", "gamma2", "mu", "kappa", "eta", "zeta1", "zeta2")
SCHEDULE_NAMES = ("alpha", "gamma1", "phi")


@dataclass(frozen=True)
class ParameterSet:
    """All rates of either model.

    Construction only checks structure.  Sign and range checks live in
    :meth:`check` so that out-of-support points can still be scored by the
    prior (which returns ``-inf`` for them).
    """

    alpha: RateSchedule
    beta: float
    gamma1: RateSchedule
    gamma2: float
    phi: RateSchedule
    mu: float
    kappa: float
    eta: float
    zeta1: float
    zeta2: float

    def __post_init__(self):
        for name in SCHEDULE_NAMES:
            value = getattr(self, name)
            if not isinstance(value, RateSchedule):
                object.__setattr__(self, name, RateSchedule.constant(float(value)))
        for name in SCALAR_NAMES:
            object.__setattr__(self, name, float(getattr(self, name)))

    def check(self) -> None:
        """Raise :class:`ValidationError` unless every rate is usable for integration."""
        for name in SCHEDULE_NAMES:
            rates = getattr(self, name).rates
            if any(not math.isfinite(r) or r < 0 for r in rates):
                raise ValidationError(f"{name} rates must be finite and >= 0: {rates}")
        for name in SCALAR_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValidationError(f"kappa must lie in (0, 1], got {self.kappa}")

    # -- flat vector view ---------------------------------------------------

    def names(self) -> list[str]:
        """Flat parameter names, schedules expanded as ``alpha_0``, ``alpha_1``, ..."""
        out = []
        for name in PARAMETER_ORDER:
            if name in SCHEDULE_NAMES:
                out.extend(f"{name}_{i}" for i in range(len(getattr(self, name))))
            else:
                out.append(name)
        return out

    def to_vector(self) -> np.ndarray:
        out = []
        for name in PARAMETER_ORDER:
            value = getattr(self, name)
            if name in SCHEDULE_NAMES:
                out.extend(value.rates)
            else:
                out.append(value)
        return np.array(out, dtype=float)

    def from_vector(self, vector: Sequence[float]) -> "ParameterSet":
        """New parameter set with this one's breakpoints and the given values."""
        vector = list(map(float, vector))
        if len(vector) != len(self.names()):
            raise ValidationError(
                f"expected {len(self.names())} values, got {len(vector)}"
            )
        kwargs = {}
        pos = 0
        for name in PARAMETER_ORDER:
            if name in SCHEDULE_NAMES:
                sched = getattr(self, name)
                kwargs[name] = sched.with_rates(vector[pos:pos + len(sched)])
                pos += len(sched)
            else:
                kwargs[name] = vector[pos]
                pos += 1
        return ParameterSet(**kwargs)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names(), self.to_vector().tolist()))

    def replace(self, **changes) -> "ParameterSet":
        return replace(self, **changes)


PARAMETER_ORDER = (
    "alpha", "beta", "gamma1", "gamma2", "phi", "mu", "kappa", "eta", "zeta1", "zeta2",
)


@dataclass(frozen=True)
class VaccinationPolicy:
    """Day vaccination switches on, with an optional replacement efficacy."""

    start_day: int = 0
    efficacy_override: Optional[float] = None

    def __post_init__(self):
        if self.start_day < 0:
            raise ValidationError(f"start_day must be >= 0, got {self.start_day}")
        if self.efficacy_override is not None and not 0.0 < self.efficacy_override <= 1.0:
            raise ValidationError(
                f"efficacy override must lie in (0, 1], got {self.efficacy_override}"
            )

    def effective_kappa(self, params: ParameterSet) -> float:
        if self.efficacy_override is None:
            return params.kappa
        return self.efficacy_override


# -- right-hand sides -------------------------------------------------------
#
# The compiled kernels take rates already resolved at time t and also fill
# two auxiliary slots past the compartments: the E -> I inflow (cumulative
# infections) and the reinfection inflow (cumulative reinfections).

@njit(cache=True, nogil=True)
def _rhs_m1(y, out, alpha, beta, g1, g2, phi, mu, kappa, eta, z1, z2):
    s1 = y[0]; e = y[1]; i = y[2]; re = y[3]; ri = y[4]
    s2 = y[6]; ii = y[7]; v = y[9]
    infection = alpha * s1 * e
    reinfection = phi * alpha * s2 * e
    vax_waning = z2 * (1.0 - kappa) * v
    out[0] = -infection - mu * s1
    out[1] = infection - (beta + g1 + mu) * e
    out[2] = beta * e - (g1 + eta) * i
    out[3] = g1 * e - mu * re
    out[4] = g1 * i - z1 * ri
    out[5] = eta * i
    out[6] = z1 * ri - reinfection + vax_waning
    out[7] = reinfection - g2 * ii
    out[8] = g2 * ii
    out[9] = mu * (s1 + e + re) - vax_waning
    if out.shape[0] > 10:
        out[10] = beta * e
        out[11] = reinfection


@njit(cache=True, nogil=True)
def _rhs_m2(y, out, alpha, beta, g1, g2, phi, mu, kappa, eta, z1, z2):
    s = y[0]; e = y[1]; i = y[2]; re = y[3]; ri = y[4]
    ii = y[6]; rr = y[7]; v = y[8]
    infection = alpha * s * e
    breakthrough = alpha * (1.0 - kappa) * v * e
    reinfection = alpha * phi * e * ri
    out[0] = -infection - mu * s + z1 * rr + z2 * v
    out[1] = infection - (beta + g1 + mu) * e + breakthrough
    out[2] = beta * e - (g1 + eta) * i
    out[3] = g1 * e - mu * re
    out[4] = g1 * i - reinfection
    out[5] = eta * i
    out[6] = reinfection - g2 * ii
    out[7] = g2 * ii - z1 * rr
    out[8] = mu * (s + e + re) - z2 * v - breakthrough
    if out.shape[0] > 9:
        out[9] = beta * e
        out[10] = reinfection


def _rhs(tag: ModelTag, state, params: ParameterSet, t: float) -> StateVector:
    state_tag = state.model_tag if isinstance(state, StateVector) else None
    if state_tag is not None and state_tag is not tag:
        raise ModelMismatchError(f"{tag.value} rhs given a {state_tag.value} state")
    y = np.asarray(state.values if state_tag is not None else state, dtype=float)
    if y.shape != (tag.n_compartments,):
        raise ModelMismatchError(
            f"{tag.value} expects {tag.n_compartments} compartments, got shape {y.shape}"
        )
    out = np.zeros(tag.n_compartments)
    kernel = _rhs_m1 if tag is ModelTag.M1 else _rhs_m2
    kernel(
        y, out,
        rate_at(params.alpha, t), params.beta, rate_at(params.gamma1, t),
        params.gamma2, rate_at(params.phi, t), params.mu, params.kappa,
        params.eta, params.zeta1, params.zeta2,
    )
    return out


def rhs_model1(state, params: ParameterSet, t: float) -> np.ndarray:
    """Time derivative of every Model 1 compartment at day ``t``.

    ``state`` may be a :class:`StateVector` or a plain length-10 array.  The
    scheduled rates are evaluated at ``t``; ``mu`` and ``kappa`` are taken
    as given (vaccination timing is the integrator's concern).
    """
    return _rhs(ModelTag.M1, state, params, t)


def rhs_model2(state, params: ParameterSet, t: float) -> np.ndarray:
    """Time derivative of every Model 2 compartment at day ``t`` (9 entries)."""
    return _rhs(ModelTag.M2, state, params, t)


def rhs(model_tag, state, params: ParameterSet, t: float) -> np.ndarray:
    return _rhs(ModelTag.parse(model_tag), state, params, t)
