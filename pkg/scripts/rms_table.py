"""RMS of peak errors over iterations, averaged over seeds (NL_D, iteration-varying reference).

The initialization box is exposed because the strategy ordering depends on it:

    python scripts/rms_table.py --seeds 10
    python scripts/rms_table.py --seeds 10 --box 0 10 --b-high 10
"""

import argparse

from mmailc.harness import ExperimentConfig, InitBox, compare_strategies


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--plant", default="NL_D")
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--first-seed", type=int, default=0)
    parser.add_argument("--K", type=int, default=60)
    parser.add_argument("--box", type=float, nargs=2, default=(-5.0, 5.0), metavar=("LOW", "HIGH"))
    parser.add_argument("--b-high", type=float, default=5.0)
    parser.add_argument("--reference", default="iteration_varying_uniform")
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    cfg = ExperimentConfig(plant=args.plant, reference=args.reference, K=args.K,
                           init_box=InitBox(low=args.box[0], high=args.box[1], b_high=args.b_high))
    seeds = list(range(args.first_seed, args.first_seed + args.seeds))
    batches = compare_strategies(cfg, seeds, workers=args.workers)
    print(f"{'strategy':<10}{'ident mean':>12}{'track mean':>12}{'track min':>12}{'track max':>12}")
    for label, batch in batches.items():
        s = batch.summary()
        print(f"{label:<10}{s['rms_ident']['mean']:>12.4f}{s['rms_track']['mean']:>12.4f}"
              f"{s['rms_track']['min']:>12.4f}{s['rms_track']['max']:>12.4f}")


if __name__ == "__main__":
    main()
