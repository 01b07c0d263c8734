"""Experiment loop, seeded streams, runtime invariant checks and metrics."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from mmailc.control import TrackingMemory, control_input, tracking_error_recursion_check, validate_beta
from mmailc.dynamics import (
    PLANT_NAMES,
    REFERENCE_KINDS,
    SCHEDULE_VARIANTS,
    PlantSpec,
    ReferenceSpec,
    builtin_plant,
    plant_step,
    reference_trajectory,
    regression_vector,
)
from mmailc.errors import ConfigError, ContractViolation, InvariantViolation
from mmailc.estimation import B_INDEX, EstimatorBank, alpha_squared, cef_diagnostics, identification_error
from mmailc.supervision import SelectionHistory, SelectionTrace, SwitchingPolicy, active_model, select_case2

# Tolerances for the runtime invariants.
TOL_MONOTONE = 1e-12
TOL_DECREASE = 1e-10
TOL_INCREMENT = 1e-12
RTOL_CLOSED_LOOP = 1e-9

# Labels of the disjoint random substreams (SeedSequence spawn keys).
STREAM_INIT = 0
STREAM_SCALING = 1


@dataclass(frozen=True)
class InitBox:
    """Uniform box for the initial estimates. ``b_low=None`` means ``b_min``."""

    low: float = -5.0
    high: float = 5.0
    b_low: float | None = None
    b_high: float = 5.0


@dataclass(frozen=True)
class ExperimentConfig:
    plant: str | PlantSpec = "NL_D"
    schedule: str = "literal"
    reference: str = "iteration_invariant"
    scaling_bounds: tuple[float, float] = (-0.5, 0.5)
    T: int = 100
    K: int = 60
    beta: float = 0.2
    mode: str = "single"
    M: int | None = None
    b_min: float = 0.1
    seed: int = 42
    init: str = "random"
    init_box: InitBox = field(default_factory=InitBox)
    initial_state: tuple[float, ...] | None = None
    check_invariants: bool = True
    strict: bool = True
    keep_tables: bool = False
    out_dir: str = "out"
    trace: bool = False
    plot: bool = False

    def __post_init__(self):
        if self.M is None:
            object.__setattr__(self, "M", 1 if self.mode == "single" else 10)
        if isinstance(self.init_box, dict):
            object.__setattr__(self, "init_box", InitBox(**self.init_box))
        object.__setattr__(self, "scaling_bounds", tuple(float(v) for v in self.scaling_bounds))
        if self.initial_state is not None:
            object.__setattr__(self, "initial_state", tuple(float(v) for v in self.initial_state))
        self.validate()

    def validate(self) -> None:
        if isinstance(self.plant, str) and self.plant not in PLANT_NAMES:
            raise ConfigError(f"unknown plant {self.plant!r}; expected one of {', '.join(PLANT_NAMES)}", key="plant")
        if self.schedule not in SCHEDULE_VARIANTS:
            raise ConfigError(f"schedule must be one of {SCHEDULE_VARIANTS}, got {self.schedule!r}", key="schedule")
        if self.reference not in REFERENCE_KINDS:
            raise ConfigError(f"reference must be one of {REFERENCE_KINDS}, got {self.reference!r}", key="reference")
        if len(self.scaling_bounds) != 2 or self.scaling_bounds[0] > self.scaling_bounds[1]:
            raise ConfigError(f"scaling_bounds must be [lo, hi] with lo <= hi", key="scaling_bounds")
        if not (isinstance(self.T, int) and self.T >= 2):
            raise ConfigError(f"T must be an integer >= 2, got {self.T!r}", key="T")
        if not (isinstance(self.K, int) and self.K >= 1):
            raise ConfigError(f"K must be an integer >= 1, got {self.K!r}", key="K")
        validate_beta(self.beta)
        if not (isinstance(self.M, int) and self.M >= 1):
            raise ConfigError(f"M must be an integer >= 1, got {self.M!r}", key="M")
        SwitchingPolicy(self.mode, self.M)
        if not self.b_min > 0:
            raise ConfigError(f"b_min must be > 0, got {self.b_min}", key="b_min")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed!r}", key="seed")
        if self.init not in ("random", "truth"):
            raise ConfigError(f"init must be 'random' or 'truth', got {self.init!r}", key="init")
        box = self.init_box
        b_low = self.b_min if box.b_low is None else box.b_low
        if box.low > box.high:
            raise ConfigError("init_box.low must not exceed init_box.high", key="init_box.low")
        if b_low < self.b_min:
            raise ConfigError(f"init_box.b_low={b_low} is below b_min={self.b_min}", key="init_box.b_low")
        if b_low > box.b_high:
            raise ConfigError("init_box.b_low must not exceed init_box.b_high", key="init_box.b_high")

    def replace(self, **changes) -> "ExperimentConfig":
        if "mode" in changes and "M" not in changes:
            changes["M"] = None if changes["mode"] != self.mode else self.M
        return dataclasses.replace(self, **changes)

    @property
    def policy(self) -> SwitchingPolicy:
        return SwitchingPolicy(self.mode, self.M)

    def build_plant(self) -> PlantSpec:
        if isinstance(self.plant, PlantSpec):
            if self.plant.horizon != self.T:
                raise ConfigError(f"custom plant horizon {self.plant.horizon} differs from T={self.T}", key="T")
            return self.plant
        return builtin_plant(self.plant, self.schedule, self.T, self.b_min, self.initial_state)

    def build_reference(self) -> ReferenceSpec:
        return ReferenceSpec(self.reference, self.T, self.scaling_bounds)


def stream(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for the labeled substream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def initial_estimates(config: ExperimentConfig, q: int) -> np.ndarray:
    """(M, q) initial estimates; model j's draw depends only on (seed, j)."""
    box = config.init_box
    b_low = config.b_min if box.b_low is None else box.b_low
    lo = np.full(q, box.low)
    hi = np.full(q, box.high)
    lo[B_INDEX], hi[B_INDEX] = b_low, box.b_high
    out = np.empty((config.M, q))
    for j in range(config.M):
        unit = stream(config.seed, STREAM_INIT, j).random(q)
        out[j] = lo + (hi - lo) * unit
    return out


@dataclass
class Violation:
    name: str
    k: int
    t: int | None
    j: int | None
    detail: str


class InvariantMonitor:
    """Collects invariant breaches; in strict mode the first breach aborts the run."""

    def __init__(self, strict: bool = True):
        self.strict = strict
        self.violations: list[Violation] = []

    def require(self, name: str, ok, k: int, detail: str = "", per_model: bool = True) -> None:
        ok = np.asarray(ok, dtype=bool)
        if ok.all():
            return
        idx = np.argwhere(~ok)[0]
        j, t = (int(idx[0]), int(idx[1])) if (per_model and ok.ndim == 2) else (None, int(idx[-1]))
        v = Violation(name, k, t, j, detail)
        self.violations.append(v)
        if self.strict:
            raise InvariantViolation(name, detail or "check failed", k=k, t=t, j=j)


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray          # (T+1, n) plant states
    x_m: np.ndarray        # (T+1,) reference for the n-th state
    u: np.ndarray          # (T,)
    e: np.ndarray          # (T,) e_n,k(t+1)
    e_hat: np.ndarray      # (M, T) e_hat_n,j,k(t+1)
    j_star: np.ndarray     # (T,) model driving u_k(t)
    phi: np.ndarray        # (T, q) regressors
    scaling: float | None = None

    @property
    def e_hat_sel(self) -> np.ndarray:
        return self.e_hat[self.j_star, np.arange(self.j_star.shape[0])]

    @property
    def max_track_err(self) -> float:
        return float(np.max(np.abs(self.e)))

    @property
    def max_ident_err(self) -> float:
        return float(np.max(np.abs(self.e_hat_sel)))

    @property
    def max_ident_err_per_model(self) -> np.ndarray:
        return np.max(np.abs(self.e_hat), axis=1)

    @property
    def switches(self) -> int:
        return SelectionTrace.switch_count(self.j_star)

    @property
    def j_star_mode(self) -> int:
        return SelectionTrace.mode_of(self.j_star)


def rms_metric(inf_norms) -> float:
    """sqrt(mean(norms^2)) over iterations."""
    inf_norms = np.asarray(inf_norms, dtype=float)
    if inf_norms.size == 0:
        raise ContractViolation("rms_metric needs at least one iteration")
    return float(np.sqrt(np.mean(inf_norms ** 2)))


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[IterationRecord]
    scalings: list[float]
    violations: list[Violation]
    min_b_hat: float
    tables: list[np.ndarray] | None = None   # K+1 snapshots of (M, T, q) when keep_tables

    @property
    def track_norms(self) -> np.ndarray:
        return np.array([r.max_track_err for r in self.records])

    @property
    def ident_norms(self) -> np.ndarray:
        return np.array([r.max_ident_err for r in self.records])

    @property
    def rms_track(self) -> float:
        return rms_metric(self.track_norms)

    @property
    def rms_ident(self) -> float:
        return rms_metric(self.ident_norms)

    def trailing_window_decreases(self, window: int = 10) -> dict[str, bool]:
        """Max over the last ``window`` iterations is below the max over the first ``window``."""
        out = {}
        for name, norms in (("track", self.track_norms), ("ident", self.ident_norms)):
            out[name] = bool(np.max(norms[-window:]) < np.max(norms[:window]))
        return out


def _check_update(monitor, diag, new_tables, b_min, k):
    monitor.require("cef_monotone", diag.V_after <= diag.V_before + TOL_MONOTONE, k,
                    "energy increased over an update")
    monitor.require("cef_decrease_bound", diag.dV <= diag.decrease_bound + TOL_DECREASE, k,
                    "energy change exceeds -alpha^2 e_hat^2")
    monitor.require("increment_bound", diag.increment <= np.abs(diag.e_hat) + TOL_INCREMENT, k,
                    "estimate moved further than |e_hat|")
    monitor.require("increment_bound_sq", diag.increment ** 2 <= diag.e_hat ** 2 + TOL_INCREMENT, k,
                    "squared estimate increment exceeds e_hat^2")
    monitor.require("projection_safety", new_tables[..., B_INDEX] >= b_min, k, "stored b_hat below b_min")


def run_iteration(k: int, bank: EstimatorBank, memory: TrackingMemory, plant: PlantSpec,
                  policy: SwitchingPolicy, x_m, rho, history: SelectionHistory,
                  monitor: InvariantMonitor | None = None, scaling: float | None = None):
    """One pass over t = 0..T-1 followed by the offline update of every model.

    Returns ``(record, next_bank, next_history)`` and refreshes ``memory`` in
    place. ``bank`` is only read during the pass.
    """
    T, M = bank.T, bank.M
    if T != plant.horizon:
        raise ContractViolation(f"bank horizon {T} differs from plant horizon {plant.horizon}")
    q = plant.p + 2
    tables = bank.tables
    beta = memory.beta
    e_prev = memory.e_prev

    x = np.empty((T + 1, plant.order))
    x[0] = plant.initial_state
    u = np.empty(T)
    phis = np.empty((T, q))
    e_hat = np.empty((M, T))
    e = np.empty(T)
    j_star = np.empty(T, dtype=int)
    scale = np.empty(T)

    for t in range(T):
        history.current_errors = e_hat[:, :t]
        j = active_model(policy, k, t, history)
        j_star[t] = j
        xi = plant.regressor(x[t])
        u[t] = control_input(tables[j, t], xi, rho[t], e_prev[t], beta)
        phi = regression_vector(xi, u[t])
        phis[t] = phi
        x[t + 1] = plant_step(x[t], u[t], t, plant)
        x_n = x[t + 1, -1]
        e_hat[:, t] = identification_error(x_n, tables[:, t], phi)
        e[t] = x_n - rho[t]
        scale[t] = max(abs(x_n), abs(rho[t]), abs(beta * e_prev[t]), float(np.max(np.abs(tables[j, t] * phi))))

    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(e_hat))):
        if monitor is not None:
            monitor.require("finite", np.isfinite(e_hat), k, "simulation produced non-finite values")
        raise InvariantViolation("finite", "simulation produced non-finite values", k=k)

    next_bank = bank.advance(phis, e_hat)

    if monitor is not None:
        ok = [tracking_error_recursion_check(e[t], e_hat[j_star[t], t], e_prev[t], beta,
                                             RTOL_CLOSED_LOOP, scale[t]) for t in range(T)]
        monitor.require("closed_loop_identity", ok, k, "e != e_hat_sel + beta e_prev", per_model=False)
        diag = cef_diagnostics(plant.theta_table, tables, next_bank.tables, phis, e_hat)
        _check_update(monitor, diag, next_bank.tables, bank.b_min, k)

    record = IterationRecord(k=k, x=x, x_m=np.concatenate([[x_m[0]], rho]), u=u, e=e,
                             e_hat=e_hat, j_star=j_star, phi=phis, scaling=scaling)
    memory.refresh(e)
    final = select_case2(e_hat[:, T - 1]) if policy.mode == "mm_case2" else None
    next_history = SelectionHistory(previous_errors=e_hat, previous_final=final)
    return record, next_bank, next_history


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    plant = config.build_plant()
    reference = config.build_reference()
    policy = config.policy
    q = plant.p + 2
    if config.init == "truth":
        bank = EstimatorBank(np.repeat(plant.theta_table[None], config.M, axis=0), config.b_min)
    else:
        bank = EstimatorBank.uniform(initial_estimates(config, q), config.T, config.b_min)
    memory = TrackingMemory(config.T, config.beta)
    history = SelectionHistory()
    monitor = InvariantMonitor(config.strict) if config.check_invariants else None
    scaling_rng = stream(config.seed, STREAM_SCALING)
    lo, hi = config.scaling_bounds

    records, scalings = [], []
    snapshots = [bank.tables] if config.keep_tables else None
    min_b = float(np.min(bank.tables[..., B_INDEX]))
    energy_budget = np.zeros((config.M, config.T))
    V_first = None
    for k in range(1, config.K + 1):
        scaling = float(scaling_rng.uniform(lo, hi)) if reference.varying else None
        if scaling is not None:
            scalings.append(scaling)
        x_m, rho = reference_trajectory(reference, k, scaling)
        record, next_bank, history = run_iteration(k, bank, memory, plant, policy, x_m, rho, history,
                                                   monitor, scaling)
        if monitor is not None:
            if V_first is None:
                V_first = np.sum((plant.theta_table - bank.tables) ** 2, axis=-1)
            energy_budget += alpha_squared(record.phi) * record.e_hat ** 2
            monitor.require("l2_budget", energy_budget <= V_first + TOL_DECREASE * k, k,
                            "cumulative alpha^2 e_hat^2 exceeds the first-iteration energy")
        records.append(record)
        bank = next_bank
        min_b = min(min_b, float(np.min(bank.tables[..., B_INDEX])))
        if snapshots is not None:
            snapshots.append(bank.tables)

    return ExperimentReport(
        config=config,
        records=records,
        scalings=scalings,
        violations=[] if monitor is None else monitor.violations,
        min_b_hat=min_b,
        tables=snapshots,
    )


@dataclass
class BatchResult:
    config: ExperimentConfig
    seeds: list[int]
    reports: list[ExperimentReport]

    @property
    def rows(self) -> list[dict]:
        return [
            {
                "seed": s,
                "rms_track": r.rms_track,
                "rms_ident": r.rms_ident,
                "final_track": float(r.track_norms[-1]),
                "final_ident": float(r.ident_norms[-1]),
            }
            for s, r in zip(self.seeds, self.reports)
        ]

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for key in ("rms_track", "rms_ident"):
            vals = np.array([row[key] for row in self.rows])
            out[key] = {"mean": float(vals.mean()), "min": float(vals.min()), "max": float(vals.max())}
        return out


def _run_seed(args):
    config, seed = args
    return run_experiment(config.replace(seed=seed))


def batch_run(config: ExperimentConfig, seeds, workers: int | None = None) -> BatchResult:
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ContractViolation("batch_run needs at least one seed")
    jobs = [(config, s) for s in seeds]
    if workers and workers > 1 and not isinstance(config.plant, PlantSpec):
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_seed, jobs))
    else:
        reports = [_run_seed(job) for job in jobs]
    return BatchResult(config, seeds, reports)


STRATEGIES = (("SM", "single"), ("MM1", "mm_case1"), ("MM2", "mm_case2"))


def compare_strategies(config: ExperimentConfig, seeds, M: int = 10, workers: int | None = None) -> dict[str, BatchResult]:
    """Run SM, MM case 1 and MM case 2 on the same plant, reference and seeds."""
    out = {}
    for label, mode in STRATEGIES:
        cfg = config.replace(mode=mode, M=1 if mode == "single" else M)
        out[label] = batch_run(cfg, seeds, workers)
    return out
