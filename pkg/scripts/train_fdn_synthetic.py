"""Train one decomposition-pair model on the merged synthetic view.

Generates view I (both tasks), trains with the requested loss weights and
ablation switches, prints the per-epoch losses and final test metrics, and
optionally saves a checkpoint.
"""
import argparse
import json

from fdn.datagen import default_config, generate
from fdn.losses import LossWeights
from fdn.models import ModelSpec, param_count, save_checkpoint
from fdn.training import TrainConfig, effective_spec, evaluate
from fdn.training import orthogonality_diagnostic, train


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20_000)
    parser.add_argument("--test-n", type=int, default=5_000)
    parser.add_argument("--d", type=int, default=16)
    parser.add_argument("--m", type=int, default=4)
    parser.add_argument("--data-seed", type=int, default=8)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--dcp", type=int, default=4)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--w-orth", type=float, default=0.1)
    parser.add_argument("--w-aux", type=float, default=0.1)
    parser.add_argument("--ablate", action="append", default=[],
                        choices=["orth", "aux", "shared"])
    parser.add_argument("--ckpt", default=None)
    args = parser.parse_args(argv)

    synth = default_config(n_samples=args.n + args.test_n, seed=args.data_seed,
                           d=args.d, m=args.m)
    train_set, test_set = generate(synth, "I").split(args.n)

    spec = ModelSpec(kind="fdn", task_kinds=("regression", "regression"),
                     n_dense=args.d, expert_hidden=(128, 64), tower_hidden=32,
                     dcps_per_task=args.dcp)
    config = TrainConfig(
        epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr,
        seed=args.seed,
        loss_weights=LossWeights(w_task=1.0, w_orth=args.w_orth,
                                 w_aux=args.w_aux),
        ablate_orth="orth" in args.ablate,
        ablate_aux="aux" in args.ablate,
        ablate_shared_fusion="shared" in args.ablate,
    )
    print(f"fdn with {args.dcp} pairs/task, {param_count(effective_spec(spec, config))} parameters")

    params, report = train(spec, train_set, config)
    for i, ep in enumerate(report.epoch_losses, start=1):
        print(f"epoch {i}: total {ep.total:.4f} task {ep.task:.4f} "
              f"orth {ep.orth:.4f} aux {ep.aux:.4f}")

    eff = effective_spec(spec, config)
    metrics = {m.name: m.value for m in evaluate(eff, params, test_set)}
    print("test metrics:", json.dumps(metrics, sort_keys=True))
    diag = orthogonality_diagnostic(eff, params, test_set)
    print(f"orthogonality diagnostic: {diag.mean:.5f} "
          f"({len(diag.per_pair)} pairs, {diag.excluded_rows} rows excluded)")

    if args.ckpt:
        save_checkpoint(eff, params, args.ckpt)
        print(f"wrote {args.ckpt}")


if __name__ == "__main__":
    main()
