"""Certainty-equivalent ILC law and the previous-iteration error memory."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mmailc.dynamics import inner
from mmailc.errors import ConfigError, InvariantViolation


def validate_beta(beta: float) -> float:
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}", key="beta")
    return float(beta)


@dataclass
class TrackingMemory:
    """Holds e_{n,k-1}(t+1) for t = 0..T-1. Starts at zero for the first iteration."""

    T: int
    beta: float = 0.2
    e_prev: np.ndarray = field(default=None)

    def __post_init__(self):
        validate_beta(self.beta)
        if self.e_prev is None:
            self.e_prev = np.zeros(self.T)
        self.e_prev = np.asarray(self.e_prev, dtype=float)
        if self.e_prev.shape != (self.T,):
            raise ConfigError(f"e_prev must have length {self.T}", key="e_prev")

    def refresh(self, e_current) -> None:
        e_current = np.asarray(e_current, dtype=float)
        if e_current.shape != (self.T,):
            raise ConfigError(f"tracking error must have length {self.T}", key="e_prev")
        self.e_prev = e_current.copy()


def control_input(theta_hat_sel, xi, rho_t: float, e_prev_t1: float, beta: float) -> float:
    """u = (beta e_prev + rho - theta1_hat . xi - d_hat) / b_hat."""
    theta_hat_sel = np.asarray(theta_hat_sel, dtype=float)
    b_hat = theta_hat_sel[-2]
    if not b_hat > 0.0:
        raise InvariantViolation("projection_safety", f"selected b_hat={b_hat} is not positive")
    feedforward = inner(theta_hat_sel[:-2], xi)
    return float((beta * e_prev_t1 + rho_t - feedforward - theta_hat_sel[-1]) / b_hat)


def tracking_error_recursion_check(e_n_k: float, e_hat_sel: float, e_prev_t1: float, beta: float,
                                   rtol: float = 1e-9, scale: float | None = None) -> bool:
    """True iff e = e_hat_sel + beta e_prev within ``rtol`` relative tolerance.

    The tolerance is relative to ``scale``, which defaults to the largest term
    of the identity; callers with cancellation elsewhere in the loop pass the
    magnitude of the terms actually summed.
    """
    rhs = e_hat_sel + beta * e_prev_t1
    if scale is None:
        scale = max(abs(e_n_k), abs(e_hat_sel), abs(beta * e_prev_t1))
    return abs(e_n_k - rhs) <= rtol * scale
