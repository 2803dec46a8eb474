"""Fixed-step RK4 integration of the mean trajectories.

Integration runs interval by interval between *knots*: every integer output
day, every rate-schedule breakpoint and the vaccination start day.  Rates are
constant inside an interval, so each knot is hit exactly and no RK4 stage
straddles a jump.
"""

from __future__ import annotations

import math
from functools import lru_cache
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import InstabilityError, ModelMismatchError, ValidationError
from .model import (
    ModelTag,
    ParameterSet,
    StateVector,
    VaccinationPolicy,
    _rhs_m1,
    _rhs_m2,
    rates_at,
)

DEFAULT_STEP = 0.1
# Undershoot tolerated during integration before aborting.
UNDERSHOOT = -1e-6

_OK = 0
_NEGATIVE = 1
_NONFINITE = 2


@dataclass(frozen=True)
class MeanTrajectory:
    """Daily mean occupancies ``values[day, compartment]`` for days ``0..horizon``.

    ``cumulative_infections`` integrates the E -> I inflow on top of the
    initial I; ``cumulative_reinfections`` integrates the reinfection inflow
    on top of the initial I_I.
    """

    model_tag: ModelTag
    days: np.ndarray
    values: np.ndarray
    cumulative_infections: np.ndarray
    cumulative_reinfections: np.ndarray

    @property
    def horizon(self) -> int:
        return int(self.days[-1])

    def series(self, name: str) -> np.ndarray:
        if name == "cumulative_infections":
            return self.cumulative_infections
        if name == "cumulative_reinfections":
            return self.cumulative_reinfections
        return self.values[:, self.model_tag.index(name)]

    def state(self, day: int) -> StateVector:
        return StateVector(self.model_tag, self.values[day])

    def totals(self) -> np.ndarray:
        return self.values.sum(axis=1)


@njit(cache=True, nogil=True)
def _rk4_kernel(model, y0, knots, record, alpha, gamma1, phi, mu, beta,
                gamma2, kappa, eta, zeta1, zeta2, h, n_out, n_comp):
    n = y0.shape[0]
    y = y0.copy()
    out = np.zeros((n_out, n))
    k1 = np.empty(n); k2 = np.empty(n); k3 = np.empty(n); k4 = np.empty(n)
    tmp = np.empty(n)
    if record[0] >= 0:
        out[record[0]] = y
    for seg in range(knots.shape[0] - 1):
        t0 = knots[seg]
        length = knots[seg + 1] - t0
        steps = int(math.ceil(length / h - 1e-9))
        if steps < 1:
            steps = 1
        dt = length / steps
        a = alpha[seg]; g1 = gamma1[seg]; p = phi[seg]; m = mu[seg]
        for step in range(steps):
            if model == 1:
                _rhs_m1(y, k1, a, beta, g1, gamma2, p, m, kappa, eta, zeta1, zeta2)
                for j in range(n):
                    tmp[j] = y[j] + 0.5 * dt * k1[j]
                _rhs_m1(tmp, k2, a, beta, g1, gamma2, p, m, kappa, eta, zeta1, zeta2)
                for j in range(n):
                    tmp[j] = y[j] + 0.5 * dt * k2[j]
                _rhs_m1(tmp, k3, a, beta, g1, gamma2, p, m, kappa, eta, zeta1, zeta2)
                for j in range(n):
                    tmp[j] = y[j] + dt * k3[j]
                _rhs_m1(tmp, k4, a, beta, g1, gamma2, p, m, kappa, eta, zeta1, zeta2)
            else:
                _rhs_m2(y, k1, a, beta, g1, gamma2, p, m, kappa, eta, zeta1, zeta2)
                for j in range(n):
                    tmp[j] = y[j] + 0.5 * dt * k1[j]
                _rhs_m2(tmp, k2, a, beta, g1, gamma2, p, m, kappa, eta, zeta1, zeta2)
                for j in range(n):
                    tmp[j] = y[j] + 0.5 * dt * k2[j]
                _rhs_m2(tmp, k3, a, beta, g1, gamma2, p, m, kappa, eta, zeta1, zeta2)
                for j in range(n):
                    tmp[j] = y[j] + dt * k3[j]
                _rhs_m2(tmp, k4, a, beta, g1, gamma2, p, m, kappa, eta, zeta1, zeta2)
            for j in range(n):
                y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            for j in range(n_comp):
                if not math.isfinite(y[j]):
                    return out, _NONFINITE, t0 + (step + 1) * dt, j, y[j]
                if y[j] < UNDERSHOOT:
                    return out, _NEGATIVE, t0 + (step + 1) * dt, j, y[j]
        if record[seg + 1] >= 0:
            out[record[seg + 1]] = y
    return out, _OK, 0.0, -1, 0.0


@dataclass(frozen=True)
class _Plan:
    """Knot layout for one (horizon, breakpoints, start day) combination."""

    knots: np.ndarray
    record: np.ndarray


@lru_cache(maxsize=64)
def _plan(horizon: int, breakpoints: tuple, start_day: float) -> _Plan:
    extra = {b for b in breakpoints if 0 < b < horizon}
    if 0 < start_day < horizon:
        extra.add(float(start_day))
    days = np.arange(horizon + 1, dtype=float)
    knots = np.union1d(days, np.array(sorted(extra), dtype=float))
    record = np.full(knots.shape[0], -1, dtype=np.int64)
    is_day = np.isin(knots, days)
    record[is_day] = knots[is_day].astype(np.int64)
    return _Plan(knots, record)


def _raw_integrate(tag: ModelTag, y0: np.ndarray, params: ParameterSet,
                   policy: VaccinationPolicy, horizon: int, step: float):
    """Run the kernel; returns ``(values, status, fail_t, fail_idx, fail_value)``."""
    breakpoints = params.alpha.breakpoints + params.gamma1.breakpoints + params.phi.breakpoints
    plan = _plan(horizon, breakpoints, float(policy.start_day))
    left = plan.knots[:-1]
    alpha = rates_at(params.alpha, left)
    gamma1 = rates_at(params.gamma1, left)
    phi = rates_at(params.phi, left)
    mu = np.where(left >= policy.start_day, params.mu, 0.0)
    n = tag.n_compartments
    y = np.zeros(n + 2)
    y[:n] = y0
    y[n] = y0[tag.index("I")]
    y[n + 1] = y0[tag.index("II")]
    return _rk4_kernel(
        1 if tag is ModelTag.M1 else 2, y, plan.knots, plan.record,
        alpha, gamma1, phi, mu, params.beta, params.gamma2,
        policy.effective_kappa(params), params.eta, params.zeta1, params.zeta2,
        float(step), horizon + 1, n,
    )


def integrate(model_tag, initial: StateVector, params: ParameterSet,
              policy: Optional[VaccinationPolicy] = None, horizon: int = 550,
              step: float = DEFAULT_STEP) -> MeanTrajectory:
    """Integrate one model from ``initial`` and sample the state at integer days.

    ``mu`` is held at zero before ``policy.start_day``; ``kappa`` is replaced
    by ``policy.efficacy_override`` when one is set.

    Raises
    ------
    InstabilityError
        If any compartment drops below ``-1e-6`` (or becomes non-finite).
    """
    tag = ModelTag.parse(model_tag)
    if policy is None:
        policy = VaccinationPolicy()
    if not isinstance(initial, StateVector):
        initial = StateVector(tag, initial)
    if initial.model_tag is not tag:
        raise ModelMismatchError(
            f"{tag.value} integration given a {initial.model_tag.value} state"
        )
    horizon = int(horizon)
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if not step > 0:
        raise ValidationError(f"step must be positive, got {step}")
    params.check()

    out, status, fail_t, fail_idx, fail_value = _raw_integrate(
        tag, initial.values, params, policy, horizon, step
    )
    if status != _OK:
        raise InstabilityError(fail_t, tag.compartments[fail_idx], fail_value)
    n = tag.n_compartments
    values = np.maximum(out[:, :n], 0.0)
    return MeanTrajectory(
        model_tag=tag,
        days=np.arange(horizon + 1),
        values=values,
        cumulative_infections=out[:, n].copy(),
        cumulative_reinfections=out[:, n + 1].copy(),
    )


def batch_integrate(model_tag, initial: StateVector,
                    params_list: Sequence[ParameterSet],
                    policy: Optional[VaccinationPolicy] = None,
                    horizon: int = 550, step: float = DEFAULT_STEP,
                    threads: int = 1) -> list:
    """Integrate many parameter sets; results keep input order.

    Failed integrations appear in the result list as the raised exception
    instead of a :class:`MeanTrajectory`.
    """

    def one(params):
        try:
            return integrate(model_tag, initial, params, policy, horizon, step)
        except (InstabilityError, ValidationError) as exc:
            return exc

    if threads <= 1:
        return [one(p) for p in params_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, params_list))


def default_threads() -> int:
    import os

    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
               else (os.cpu_count() or 1))
