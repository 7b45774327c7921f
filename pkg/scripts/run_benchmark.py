"""Run the oracle-gap study and print the median tables.

Single-task models trained on views A and B set per-task oracle MSEs;
every multi-task model sees only the merged view I. Writes the same CSVs
as `fdn benchmark-synthetic` plus a readable summary to stdout.
"""
import argparse
import dataclasses
import sys
import time

from fdn.benchmark import (
    ABLATION_VARIANTS,
    MTL_KINDS,
    BenchmarkConfig,
    run_benchmark,
    write_csvs,
)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="benchmark_out",
                        help="directory for the result CSVs")
    parser.add_argument("--seeds", type=int, default=5,
                        help="number of training seeds (1..k)")
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--trainrows", type=int, default=None)
    parser.add_argument("--testrows", type=int, default=None)
    parser.add_argument("--data-seed", type=int, default=None)
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    overrides = {"seeds": tuple(range(1, args.seeds + 1))}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.trainrows is not None:
        overrides["n_train"] = args.trainrows
    if args.testrows is not None:
        overrides["n_test"] = args.testrows
    if args.data_seed is not None:
        overrides["data_seed"] = args.data_seed
    config = dataclasses.replace(BenchmarkConfig(), **overrides)

    log = None if args.quiet else lambda msg: print(msg, file=sys.stderr)
    start = time.perf_counter()
    result = run_benchmark(config, log=log)
    elapsed = time.perf_counter() - start

    print(f"\nmedian |gap| vs oracle, % (taskA / taskB), "
          f"{len(config.seeds)} seeds, {elapsed:.0f}s")
    for kind in MTL_KINDS:
        a, b = result.median_abs_gap(kind)
        qa, qb = result.iqr_gap(kind)
        print(f"  {kind:<5} {a:7.3f} / {b:7.3f}   (IQR {qa:.3f} / {qb:.3f})")
    print("median test MSE of fdn ablations (taskA / taskB)")
    for variant in ABLATION_VARIANTS:
        a, b = result.median_ablation_mse(variant)
        print(f"  {variant:<17} {a:.4f} / {b:.4f}")
    print(f"median orthogonality ratio (with / without penalty): "
          f"{result.median_orth_ratio():.3f}")

    for path in write_csvs(result, args.out):
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
