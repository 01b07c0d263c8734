"""YAML config files: parsing with validation, and lossless serialization.

Schema (every key optional; unknown keys are rejected)::

    plant: NL_D              # LTI | LTV_D | NL | NL_D
    schedule: literal        # literal | normalized
    reference: iteration_invariant   # or iteration_varying_uniform
    scaling_bounds: [-0.5, 0.5]
    T: 100
    K: 60
    beta: 0.2
    mode: single             # single | mm_case1 | mm_case2
    M: null                  # null -> 1 for single, 10 otherwise
    b_min: 0.1
    seed: 42
    init: random             # random | truth
    init_box: {low: -5.0, high: 5.0, b_low: null, b_high: 5.0}
    initial_state: null
    check_invariants: true
    strict: true
    output: {dir: out, trace: false, plot: false}
"""

from __future__ import annotations

import os
from pathlib import Path

import yaml

from mmailc.errors import ConfigError
from mmailc.harness import ExperimentConfig, InitBox

OUT_DIR_ENV = "MMAILC_OUT_DIR"

_STR = ("plant", "schedule", "reference", "mode", "init")
_INT = ("T", "K", "seed")
_FLOAT = ("beta", "b_min")
_BOOL = ("check_invariants", "strict")
_TOP = set(_STR + _INT + _FLOAT + _BOOL) | {"M", "scaling_bounds", "init_box", "initial_state", "output"}
_BOX = ("low", "high", "b_low", "b_high")
_OUTPUT = ("dir", "trace", "plot")


def _as_float(value, key):
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be a number, got {value!r}", key=key)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        # YAML 1.1 reads "1e-1" as a string
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"{key} must be a number, got {value!r}", key=key)


def _as_int(value, key):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}", key=key)
    return value


def _as_bool(value, key):
    if not isinstance(value, bool):
        raise ConfigError(f"{key} must be true or false, got {value!r}", key=key)
    return value


def _reject_unknown(mapping, allowed, prefix=""):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown config key {prefix}{key!r}", key=f"{prefix}{key}")


def config_from_dict(data: dict, default_out_dir: str | None = None) -> ExperimentConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level", key="<root>")
    _reject_unknown(data, _TOP)
    kw = {}
    for key in _STR:
        if key in data:
            if not isinstance(data[key], str):
                raise ConfigError(f"{key} must be a string, got {data[key]!r}", key=key)
            kw[key] = data[key]
    for key in _INT:
        if key in data:
            kw[key] = _as_int(data[key], key)
    for key in _FLOAT:
        if key in data:
            kw[key] = _as_float(data[key], key)
    for key in _BOOL:
        if key in data:
            kw[key] = _as_bool(data[key], key)
    if data.get("M") is not None:
        kw["M"] = _as_int(data["M"], "M")
    if "scaling_bounds" in data:
        sb = data["scaling_bounds"]
        if not isinstance(sb, (list, tuple)) or len(sb) != 2:
            raise ConfigError("scaling_bounds must be a list [lo, hi]", key="scaling_bounds")
        kw["scaling_bounds"] = tuple(_as_float(v, "scaling_bounds") for v in sb)
    if data.get("initial_state") is not None:
        st = data["initial_state"]
        if not isinstance(st, (list, tuple)):
            raise ConfigError("initial_state must be a list of numbers", key="initial_state")
        kw["initial_state"] = tuple(_as_float(v, "initial_state") for v in st)
    if "init_box" in data:
        box = data["init_box"] or {}
        if not isinstance(box, dict):
            raise ConfigError("init_box must be a mapping", key="init_box")
        _reject_unknown(box, _BOX, "init_box.")
        box_kw = {}
        for key in _BOX:
            if key in box and box[key] is not None:
                box_kw[key] = _as_float(box[key], f"init_box.{key}")
        kw["init_box"] = InitBox(**box_kw)
    output = data.get("output") or {}
    if not isinstance(output, dict):
        raise ConfigError("output must be a mapping", key="output")
    _reject_unknown(output, _OUTPUT, "output.")
    if "dir" in output:
        if not isinstance(output["dir"], str):
            raise ConfigError("output.dir must be a string", key="output.dir")
        kw["out_dir"] = output["dir"]
    elif default_out_dir is not None:
        kw["out_dir"] = default_out_dir
    for key in ("trace", "plot"):
        if key in output:
            kw[key] = _as_bool(output[key], f"output.{key}")
    return ExperimentConfig(**kw)


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Load ``path`` (YAML), apply flag ``overrides`` (same keys as the file), validate."""
    data = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", key="--config")
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"could not parse {path}: {exc}", key="--config") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping", key="<root>")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in _OUTPUT:
            data.setdefault("output", {})
            data["output"] = dict(data["output"] or {}, **{key: value})
        else:
            data[key] = value
    return config_from_dict(data, default_out_dir=os.environ.get(OUT_DIR_ENV))


def config_to_dict(config: ExperimentConfig) -> dict:
    if not isinstance(config.plant, str):
        raise ConfigError("only built-in plants can be serialized", key="plant")
    box = config.init_box
    return {
        "plant": config.plant,
        "schedule": config.schedule,
        "reference": config.reference,
        "scaling_bounds": list(config.scaling_bounds),
        "T": config.T,
        "K": config.K,
        "beta": config.beta,
        "mode": config.mode,
        "M": config.M,
        "b_min": config.b_min,
        "seed": config.seed,
        "init": config.init,
        "init_box": {"low": box.low, "high": box.high, "b_low": box.b_low, "b_high": box.b_high},
        "initial_state": None if config.initial_state is None else list(config.initial_state),
        "check_invariants": config.check_invariants,
        "strict": config.strict,
        "output": {"dir": config.out_dir, "trace": config.trace, "plot": config.plot},
    }


def serialize_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=None)
