"""Discrete-time plant and reference trajectories.

The plant is the n-th order chain

    x_i(t+1) = x_{i+1}(t),            i < n
    x_n(t+1) = theta(t) . phi(t),     phi = [xi(x(t)), u(t), 1]

with a true parameter vector theta = [theta1, b, d] that may vary with the
sample index but not with the iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from mmailc.errors import ConfigError, ContractViolation, HorizonError

PLANT_NAMES = ("LTI", "LTV_D", "NL", "NL_D")
SCHEDULE_VARIANTS = ("literal", "normalized")
REFERENCE_KINDS = ("iteration_invariant", "iteration_varying_uniform")


def inner(theta, phi):
    """theta . phi along the last axis; broadcasts over leading model axes.

    Both the plant and the identification models go through this routine so
    that a perfect estimate reproduces the plant output bit for bit.
    """
    return np.sum(np.asarray(theta) * np.asarray(phi), axis=-1)


@dataclass(frozen=True)
class ParameterVector:
    theta1: np.ndarray
    b: float
    d: float

    def __post_init__(self):
        object.__setattr__(self, "theta1", np.atleast_1d(np.asarray(self.theta1, dtype=float)))

    @property
    def p(self) -> int:
        return self.theta1.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.theta1, [self.b, self.d]])

    @classmethod
    def from_flat(cls, values) -> "ParameterVector":
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.shape[0] < 3:
            raise ContractViolation(f"flat parameter vector needs length p+2 >= 3, got shape {values.shape}")
        return cls(values[:-2].copy(), float(values[-2]), float(values[-1]))


def regression_vector(xi, u) -> np.ndarray:
    """phi = [xi, u, 1]."""
    return np.concatenate([np.atleast_1d(np.asarray(xi, dtype=float)), [float(u), 1.0]])


def _identity(x):
    return np.asarray(x, dtype=float).copy()


def _sin_squared(x):
    return np.sin(np.asarray(x, dtype=float)) ** 2


REGRESSION_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": _identity,
    "sin_squared": _sin_squared,
}


@dataclass(frozen=True)
class PlantSpec:
    """Closed description of a simulated plant over a finite horizon.

    ``parameter_schedule`` is evaluated once per sample at construction; the
    resulting ``theta_table`` (shape ``(horizon, p+2)``) is what simulation
    and diagnostics read.
    """

    name: str
    order: int
    p: int
    regression: str | Callable[[np.ndarray], np.ndarray]
    parameter_schedule: Callable[[int], ParameterVector]
    b_min: float
    horizon: int
    initial_state: np.ndarray = None
    theta_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError(f"plant order must be >= 1, got {self.order}", key="order")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be positive, got {self.horizon}", key="T")
        if not self.b_min > 0:
            raise ConfigError(f"b_min must be > 0, got {self.b_min}", key="b_min")
        if isinstance(self.regression, str) and self.regression not in REGRESSION_FUNCTIONS:
            raise ConfigError(f"unknown regression function {self.regression!r}", key="regression")
        x0 = np.zeros(self.order) if self.initial_state is None else np.asarray(self.initial_state, dtype=float)
        if x0.shape != (self.order,):
            raise ConfigError(f"initial_state must have length {self.order}, got shape {x0.shape}", key="initial_state")
        object.__setattr__(self, "initial_state", x0)

        table = np.empty((self.horizon, self.p + 2))
        for t in range(self.horizon):
            pv = self.parameter_schedule(t)
            if pv.p != self.p:
                raise ConfigError(f"schedule returned p={pv.p} at t={t}, expected {self.p}", key="parameter_schedule")
            if pv.b < self.b_min:
                raise ConfigError(
                    f"true input coefficient b({t})={pv.b} is below b_min={self.b_min}", key="b_min"
                )
            table[t] = pv.flat
        table.setflags(write=False)
        object.__setattr__(self, "theta_table", table)

    @property
    def xi(self) -> Callable[[np.ndarray], np.ndarray]:
        if isinstance(self.regression, str):
            return REGRESSION_FUNCTIONS[self.regression]
        return self.regression

    def regressor(self, state) -> np.ndarray:
        out = np.atleast_1d(self.xi(state))
        if out.shape != (self.p,):
            raise ContractViolation(f"regression function returned shape {out.shape}, expected ({self.p},)")
        return out

    def theta(self, t: int) -> np.ndarray:
        if not 0 <= t < self.horizon:
            raise HorizonError(f"sample index {t} outside [0, {self.horizon - 1}]")
        return self.theta_table[t]


def plant_step(state, u, t, spec: PlantSpec) -> np.ndarray:
    """Advance the plant one sample from ``state`` under input ``u``."""
    state = np.asarray(state, dtype=float)
    if state.shape != (spec.order,):
        raise ContractViolation(f"state must have length {spec.order}, got shape {state.shape}")
    theta = spec.theta(t)
    phi = regression_vector(spec.regressor(state), u)
    nxt = np.empty_like(state)
    nxt[:-1] = state[1:]
    nxt[-1] = inner(theta, phi)
    return nxt


def _schedules(name: str, variant: str, horizon: int):
    # literal: sin(2*pi*t) at integer t, as printed; normalized: sin(2*pi*t/T)
    if variant == "literal":
        def w(t):
            return 2.0 * np.pi * t
    else:
        def w(t):
            return 2.0 * np.pi * t / horizon

    if name == "LTI":
        return "identity", lambda t: ParameterVector([0.5], 1.0, 0.0)
    if name == "LTV_D":
        return "identity", lambda t: ParameterVector(
            [1.0 + 0.5 * np.sin(t)], 3.0 + 0.5 * np.sin(w(t)), np.sin(w(t)) ** 3
        )
    if name == "NL":
        return "sin_squared", lambda t: ParameterVector(
            [1.0 + 0.5 * np.sin(t)], 3.0 + 0.5 * np.sin(w(t)), 0.0
        )
    if name == "NL_D":
        return "sin_squared", lambda t: ParameterVector(
            [1.5 + 0.5 * np.sin(t)], 3.0 + 0.5 * np.sin(w(t)), np.sin(w(t)) ** 3
        )
    raise ConfigError(f"unknown plant {name!r}; expected one of {', '.join(PLANT_NAMES)}", key="plant")


def builtin_plant(name: str, variant: str = "literal", horizon: int = 100, b_min: float = 0.1,
                  initial_state=None) -> PlantSpec:
    """One of the four first-order benchmark plants (LTI, LTV_D, NL, NL_D)."""
    if variant not in SCHEDULE_VARIANTS:
        raise ConfigError(f"unknown schedule variant {variant!r}", key="schedule")
    regression, schedule = _schedules(name, variant, horizon)
    return PlantSpec(
        name=name,
        order=1,
        p=1,
        regression=regression,
        parameter_schedule=schedule,
        b_min=b_min,
        horizon=horizon,
        initial_state=initial_state,
    )


@dataclass(frozen=True)
class ReferenceSpec:
    kind: str = "iteration_invariant"
    horizon: int = 100
    scaling_bounds: tuple[float, float] = (-0.5, 0.5)
    period: float = 100.0

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ConfigError(f"unknown reference kind {self.kind!r}", key="reference")
        if self.horizon < 1:
            raise ConfigError("reference horizon must be positive", key="T")
        lo, hi = self.scaling_bounds
        if not lo <= hi:
            raise ConfigError(f"scaling_bounds must satisfy lo <= hi, got {self.scaling_bounds}", key="scaling_bounds")
        object.__setattr__(self, "scaling_bounds", (float(lo), float(hi)))

    @property
    def varying(self) -> bool:
        return self.kind == "iteration_varying_uniform"


def base_trajectory(t, period: float = 100.0):
    """pi^2 (2 - 3 sin^3(2 pi t / period)) sin(2 pi t / period) / 10."""
    s = np.sin(2.0 * np.pi * np.asarray(t, dtype=float) / period)
    return np.pi ** 2 * (2.0 - 3.0 * s ** 3) * s / 10.0


def reference_trajectory(spec: ReferenceSpec, k: int, scaling_sample: float | None = None):
    """Target trajectory ``x_m`` over t = 0..T and the reference input ``rho`` over t = 0..T-1.

    ``rho[t] = x_m[t+1]``, so the first-order reference model
    ``x_m(t+1) = rho(t)`` replays ``x_m`` exactly. ``k`` is accepted for the
    record; the iteration dependence enters only through ``scaling_sample``.
    """
    x_m = base_trajectory(np.arange(spec.horizon + 1), spec.period)
    if spec.varying:
        if scaling_sample is None:
            raise ConfigError(f"iteration {k}: iteration-varying reference needs a scaling sample", key="scaling_sample")
        lo, hi = spec.scaling_bounds
        if not lo <= scaling_sample <= hi:
            raise ConfigError(f"scaling sample {scaling_sample} outside [{lo}, {hi}]", key="scaling_sample")
        x_m = scaling_sample * x_m
    return x_m, x_m[1:].copy()


def reference_model_states(rho, x0, order: int = 1) -> np.ndarray:
    """Run the reference-model chain driven by ``rho``; returns shape (T+1, order)."""
    rho = np.asarray(rho, dtype=float)
    xs = np.empty((rho.shape[0] + 1, order))
    xs[0] = x0
    for t, r in enumerate(rho):
        xs[t + 1, :-1] = xs[t, 1:]
        xs[t + 1, -1] = r
    return xs
