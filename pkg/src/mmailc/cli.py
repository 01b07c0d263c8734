"""Command-line front end.

    mmailc run --config cfg.yaml [--seed N] [--out DIR] [--trace] [--plot]
    mmailc compare --plant NL_D --seeds 10 [--reference iteration_varying_uniform]
    mmailc batch --config cfg.yaml --seeds 1,2,3
    mmailc check

Exit codes: 0 ok, 2 configuration error, 3 invariant violation, 4 I/O error,
5 internal contract violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from mmailc.config_io import OUT_DIR_ENV, config_to_dict, parse_config
from mmailc.dynamics import PLANT_NAMES, REFERENCE_KINDS, SCHEDULE_VARIANTS
from mmailc.errors import ConfigError, ContractViolation, InvariantViolation
from mmailc.harness import STRATEGIES, ExperimentConfig, batch_run, compare_strategies, run_experiment
from mmailc.outputs import emit_batch, emit_csv, emit_plot, emit_table, write_manifest
from mmailc.supervision import MODES

EXIT_CONFIG, EXIT_INVARIANT, EXIT_IO, EXIT_CONTRACT = 2, 3, 4, 5


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--seeds must be a comma-separated list of integers, got {text!r}", key="seeds")
    if not seeds:
        raise ConfigError("--seeds is empty", key="seeds")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmailc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help=f"output directory (default: config, then ${OUT_DIR_ENV}, then ./out)")
    run.add_argument("--plant", choices=PLANT_NAMES)
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--K", type=int)
    run.add_argument("--trace", action="store_true", default=None)
    run.add_argument("--plot", action="store_true", default=None)

    cmp_ = sub.add_parser("compare", help="SM vs MM case 1 vs MM case 2 on one plant")
    cmp_.add_argument("--plant", choices=PLANT_NAMES, required=True)
    cmp_.add_argument("--seeds", type=int, default=10, help="number of seeds, 0..N-1")
    cmp_.add_argument("--reference", choices=REFERENCE_KINDS, default="iteration_invariant")
    cmp_.add_argument("--schedule", choices=SCHEDULE_VARIANTS, default="literal")
    cmp_.add_argument("--K", type=int, default=60)
    cmp_.add_argument("--M", type=int, default=10)
    cmp_.add_argument("--out")
    cmp_.add_argument("--workers", type=int)

    batch = sub.add_parser("batch", help="one config over several seeds")
    batch.add_argument("--config", type=Path, required=True)
    batch.add_argument("--seeds", required=True, help="comma-separated, e.g. 1,2,3")
    batch.add_argument("--out")
    batch.add_argument("--workers", type=int)

    sub.add_parser("check", help="invariant sweep over all built-in plants and strategies (no files)")
    return parser


def _default_out(flag):
    return flag or os.environ.get(OUT_DIR_ENV) or "out"


def cmd_run(args) -> int:
    overrides = {"seed": args.seed, "plant": args.plant, "mode": args.mode, "K": args.K,
                 "dir": args.out, "trace": args.trace, "plot": args.plot}
    if args.mode is not None and args.mode == "single":
        overrides["M"] = 1
    config = parse_config(args.config, overrides)
    report = run_experiment(config)
    files = emit_csv(report, config.out_dir, trace=config.trace)
    if config.plot:
        files.append(emit_plot([report], Path(config.out_dir) / "errors.svg", labels=[config.mode],
                               title=f"{config.plant}, {config.mode}, seed {config.seed}"))
    write_manifest(config.out_dir, config_to_dict(config), [config.seed], files)
    print(f"{config.plant} {config.mode} seed={config.seed} K={config.K}: "
          f"final track {report.track_norms[-1]:.6g}, final ident {report.ident_norms[-1]:.6g}, "
          f"RMS track {report.rms_track:.6g}, RMS ident {report.rms_ident:.6g}")
    return 0


def cmd_compare(args) -> int:
    config = ExperimentConfig(plant=args.plant, reference=args.reference, schedule=args.schedule, K=args.K)
    seeds = list(range(args.seeds))
    if not seeds:
        raise ConfigError("--seeds must be >= 1", key="seeds")
    batches = compare_strategies(config, seeds, M=args.M, workers=args.workers)
    out = Path(_default_out(args.out))
    files = [emit_table(batches, out / "metrics.csv")]
    files.append(emit_plot({label: b.reports[0] for label, b in batches.items()}, out / "compare.svg",
                           title=f"{args.plant}, {args.reference}, seed {seeds[0]}"))
    write_manifest(out, config_to_dict(config), seeds, files)
    print(f"{'strategy':<10}{'RMS ident':>14}{'RMS track':>14}   (mean over {len(seeds)} seeds)")
    for label, batch in batches.items():
        s = batch.summary()
        print(f"{label:<10}{s['rms_ident']['mean']:>14.4f}{s['rms_track']['mean']:>14.4f}")
    return 0


def cmd_batch(args) -> int:
    seeds = _seed_list(args.seeds)
    config = parse_config(args.config, {"dir": args.out})
    batch = batch_run(config, seeds, workers=args.workers)
    out = Path(config.out_dir)
    files = [emit_batch(batch, out / "batch.csv")]
    write_manifest(out, config_to_dict(config), seeds, files)
    s = batch.summary()
    for key in ("rms_track", "rms_ident"):
        print(f"{key}: mean {s[key]['mean']:.6g} min {s[key]['min']:.6g} max {s[key]['max']:.6g}")
    return 0


def invariant_sweep(seed: int = 42, K: int = 60, T: int = 100):
    """Yield (plant, mode, report) for every built-in plant and strategy under strict checks."""
    for plant in PLANT_NAMES:
        for _, mode in STRATEGIES:
            config = ExperimentConfig(plant=plant, mode=mode, seed=seed, K=K, T=T,
                                      check_invariants=True, strict=True)
            yield plant, mode, run_experiment(config)


def cmd_check(args) -> int:
    for plant, mode, report in invariant_sweep():
        print(f"ok  {plant:<6} {mode:<9} violations={len(report.violations)} min_b_hat={report.min_b_hat:.6g}")
    return 0


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "batch": cmd_batch, "check": cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"configuration error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
