"""Dump per-expert feature activations for offline inspection.

Trains a small model on the merged synthetic view, then writes one CSV row
per (task, expert, input row) with the expert's role so shared and specific
activations can be compared side by side.
"""
import argparse

from fdn.datagen import default_config, generate
from fdn.models import ModelSpec
from fdn.training import TrainConfig, export_features, train


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="features.csv")
    parser.add_argument("--model", default="fdn",
                        choices=["single", "mmoe", "cgc", "ple", "fdn"])
    parser.add_argument("--n", type=int, default=5_000)
    parser.add_argument("--rows", type=int, default=256,
                        help="input rows to export")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--epochs", type=int, default=3)
    args = parser.parse_args(argv)

    synth = default_config(n_samples=args.n, seed=8, d=16, m=4)
    dataset = generate(synth, "A" if args.model == "single" else "I")
    extra = {"dcps_per_task": 2} if args.model == "fdn" else \
        {} if args.model == "single" else {"num_experts": 4}
    if args.model == "ple":
        extra["levels"] = 2
    tasks = ("regression",) if args.model == "single" else \
        ("regression", "regression")
    spec = ModelSpec(kind=args.model, task_kinds=tasks, n_dense=16,
                     expert_hidden=(32, 16), tower_hidden=8, **extra)

    params, _ = train(spec, dataset, TrainConfig(epochs=args.epochs,
                                                 batch_size=256,
                                                 seed=args.seed))
    rows = export_features(spec, params, dataset, args.out,
                           max_rows=args.rows)
    print(f"wrote {rows} rows to {args.out}")


if __name__ == "__main__":
    main()
