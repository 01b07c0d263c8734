"""Identification models, the projection update, and energy diagnostics.

Estimates are stored as arrays of shape ``(M, T, q)`` with ``q = p + 2``:
one table per model, one parameter vector per sample. The b-component is
column ``q - 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mmailc.dynamics import inner
from mmailc.errors import ContractViolation

B_INDEX = -2


def _check_match(theta_hat, phi):
    if np.shape(theta_hat)[-1] != np.shape(phi)[-1]:
        raise ContractViolation(
            f"parameter length {np.shape(theta_hat)[-1]} does not match regressor length {np.shape(phi)[-1]}"
        )


def predict(theta_hat, phi):
    """Identification-model output theta_hat . phi (broadcasts over models)."""
    _check_match(theta_hat, phi)
    return inner(theta_hat, phi)


def identification_error(x_n_next, theta_hat, phi):
    return x_n_next - predict(theta_hat, phi)


def project(m, b_min: float) -> np.ndarray:
    """Clamp the b-component of ``m`` (last axis) to at least ``b_min``."""
    out = np.array(m, dtype=float, copy=True)
    out[..., B_INDEX] = np.maximum(out[..., B_INDEX], b_min)
    return out


def alpha_squared(phi) -> np.ndarray:
    """(2 + |phi|^2) / (1 + |phi|^2)^2, the guaranteed per-update energy decrease rate."""
    n2 = np.sum(np.asarray(phi) ** 2, axis=-1)
    # r (1 + r) with r = 1 / (1 + |phi|^2); same value, no overflow for huge regressors
    r = 1.0 / (1.0 + n2)
    return r * (1.0 + r)


def adaptive_increment(phi, e_hat) -> np.ndarray:
    """phi e_hat / (1 + |phi|^2), broadcasting ``e_hat`` of shape (..., T) against phi (T, q)."""
    phi = np.asarray(phi, dtype=float)
    gain = phi / (1.0 + np.sum(phi ** 2, axis=-1))[..., None]
    return gain * np.asarray(e_hat, dtype=float)[..., None]


def update_model(theta_hat, phi, e_hat, b_min: float) -> np.ndarray:
    """End-of-iteration projection update for every sample of every model.

    ``theta_hat`` is ``(T, q)`` or ``(M, T, q)``, ``phi`` is ``(T, q)``,
    ``e_hat`` matches ``theta_hat`` without its last axis. Returns a new
    array; the input is left untouched.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    phi = np.asarray(phi, dtype=float)
    e_hat = np.asarray(e_hat, dtype=float)
    if phi.shape != theta_hat.shape[-2:]:
        raise ContractViolation(f"regressor record shape {phi.shape} does not cover table shape {theta_hat.shape[-2:]}")
    if e_hat.shape != theta_hat.shape[:-1]:
        raise ContractViolation(f"error record shape {e_hat.shape} does not match tables {theta_hat.shape[:-1]}")
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(e_hat))):
        raise ContractViolation("record contains missing (non-finite) samples")
    return project(theta_hat + adaptive_increment(phi, e_hat), b_min)


@dataclass
class EstimatorBank:
    """M estimate tables. ``advance`` returns a new bank (copy-on-advance)."""

    tables: np.ndarray
    b_min: float

    def __post_init__(self):
        self.tables = np.asarray(self.tables, dtype=float)
        if self.tables.ndim != 3:
            raise ContractViolation(f"tables must be (M, T, q), got shape {self.tables.shape}")
        if np.any(self.tables[..., B_INDEX] < self.b_min):
            raise ContractViolation("estimate table holds b_hat below b_min")

    @property
    def M(self) -> int:
        return self.tables.shape[0]

    @property
    def T(self) -> int:
        return self.tables.shape[1]

    @classmethod
    def uniform(cls, initial, T: int, b_min: float) -> "EstimatorBank":
        """One estimate per model, repeated at every sample."""
        initial = np.atleast_2d(np.asarray(initial, dtype=float))
        return cls(np.repeat(initial[:, None, :], T, axis=1), b_min)

    def errors(self, t: int, x_n_next: float, phi) -> np.ndarray:
        return identification_error(x_n_next, self.tables[:, t], phi)

    def advance(self, phi, e_hat) -> "EstimatorBank":
        return EstimatorBank(update_model(self.tables, phi, e_hat, self.b_min), self.b_min)


@dataclass
class CefDiagnostics:
    """Energy V = |theta - theta_hat|^2 before and after one update, per model and sample."""

    V_before: np.ndarray
    V_after: np.ndarray
    alpha2: np.ndarray
    e_hat: np.ndarray
    param_error: np.ndarray
    increment: np.ndarray

    @property
    def dV(self) -> np.ndarray:
        return self.V_after - self.V_before

    @property
    def decrease_bound(self) -> np.ndarray:
        """-alpha^2 e_hat^2; dV must not exceed it."""
        return -self.alpha2 * self.e_hat ** 2


def cef_diagnostics(true_theta, before, after, phi, e_hat) -> CefDiagnostics:
    """Diagnostics for one update. Needs the true schedule, so simulation only.

    ``true_theta`` is ``(T, q)``; ``before``/``after`` are ``(M, T, q)``.
    """
    true_theta = np.asarray(true_theta, dtype=float)
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    err_before = true_theta - before
    err_after = true_theta - after
    return CefDiagnostics(
        V_before=np.sum(err_before ** 2, axis=-1),
        V_after=np.sum(err_after ** 2, axis=-1),
        alpha2=np.broadcast_to(alpha_squared(phi), np.shape(e_hat)),
        e_hat=np.asarray(e_hat, dtype=float),
        param_error=err_before,
        increment=np.linalg.norm(after - before, axis=-1),
    )
