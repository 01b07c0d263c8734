"""Model selection for the estimator bank.

Model indices are 0-based throughout the Python API; files written by the
CLI label models 1..M.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mmailc.errors import ConfigError, ContractViolation

MODES = ("single", "mm_case1", "mm_case2")
DEFAULT_MODEL = 0


@dataclass(frozen=True)
class SwitchingPolicy:
    mode: str = "single"
    M: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}", key="mode")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}", key="M")
        if self.mode == "single" and self.M != 1:
            raise ConfigError(f"mode 'single' requires M=1, got M={self.M}", key="M")


def _argmin_lowest(values) -> int:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ContractViolation("empty model set")
    # np.argmin returns the first occurrence, i.e. the lowest index on ties
    return int(np.argmin(values))


def select_case1(errors) -> int:
    """Model with least identification-error energy over a whole iteration; errors is (M, T)."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2 or errors.shape[0] == 0:
        raise ContractViolation(f"expected (M, T) errors, got shape {errors.shape}")
    return _argmin_lowest(np.sum(errors ** 2, axis=1))


def select_case2(errors_at_t) -> int:
    """Model with least absolute identification error at one sample."""
    return _argmin_lowest(np.abs(np.asarray(errors_at_t, dtype=float)))


@dataclass
class SelectionHistory:
    """What the supervisor may look at when choosing the model for u_k(t).

    ``previous_errors``: (M, T) identification errors of iteration k-1, or None.
    ``previous_final``: the last Case-2 choice of iteration k-1, or None.
    ``current_errors``: (M, t) errors e_hat(1..t) already observed in iteration k.
    """

    previous_errors: np.ndarray | None = None
    previous_final: int | None = None
    current_errors: np.ndarray | None = None


def active_model(policy: SwitchingPolicy, k: int, t: int, history: SelectionHistory) -> int:
    """Index of the model whose estimates drive u_k(t). Iterations count from 1."""
    if policy.mode == "single":
        return DEFAULT_MODEL
    if policy.mode == "mm_case1":
        if k == 1:
            return DEFAULT_MODEL
        if history.previous_errors is None:
            raise ContractViolation(f"case 1 at k={k} needs iteration {k - 1}'s errors")
        return select_case1(history.previous_errors)
    # mm_case2
    if t == 0:
        if k == 1:
            return DEFAULT_MODEL
        if history.previous_final is None:
            raise ContractViolation(f"case 2 at (k={k}, t=0) needs iteration {k - 1}'s final choice")
        return int(history.previous_final)
    cur = history.current_errors
    if cur is None or cur.shape[-1] != t:
        got = None if cur is None else cur.shape[-1]
        raise ContractViolation(f"case 2 at t={t} needs exactly the errors for samples 1..{t}, got {got}")
    return select_case2(cur[:, t - 1])


@dataclass
class SelectionTrace:
    """Per-iteration record of chosen models, one array of length T per iteration."""

    choices: list[np.ndarray] = field(default_factory=list)

    def append(self, j_star) -> None:
        self.choices.append(np.asarray(j_star, dtype=int))

    @staticmethod
    def switch_count(j_star) -> int:
        j_star = np.asarray(j_star)
        return int(np.count_nonzero(j_star[1:] != j_star[:-1]))

    @staticmethod
    def mode_of(j_star) -> int:
        """Most frequently chosen model; lowest index on ties."""
        return int(np.argmax(np.bincount(np.asarray(j_star, dtype=int))))
