"""Command-line surface: data generation, training, evaluation, benchmark.

Every command is deterministic given its flags and input files; timing is
kept out of machine-readable outputs. Exit codes: 0 success, 1 runtime or
data failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .benchmark import BenchmarkConfig, run_benchmark, write_csvs
from .dataio import DataError, Schema, load_csv
from .datagen import KINDS, default_config, generate, write_csv
from .metrics import UndefinedMetricError
from .models import (
    MODEL_KINDS,
    CheckpointError,
    ModelSpec,
    load_checkpoint,
    param_count,
    save_checkpoint,
)
from .training import (
    DivergenceError,
    TrainConfig,
    effective_spec,
    evaluate,
    export_features,
    train,
)

ABLATE_CHOICES = ("orth", "aux", "shared")


class UsageError(Exception):
    """Flag combination or value the parser cannot catch; maps to exit code 2."""


def _from_flags(factory):
    """Build a config from flag values; rejection is a usage error."""
    try:
        return factory()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_schema(path: str) -> Schema:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if "tasks" not in d and "schema" in d:
        d = d["schema"]
    return Schema.from_json_dict(d)


def _check_model_flags(args: argparse.Namespace) -> None:
    if args.dcp is not None and args.model != "fdn":
        raise UsageError(f"--dcp only applies to fdn, not {args.model}")
    if args.experts is not None and args.model not in ("mmoe", "cgc", "ple"):
        raise UsageError(f"--experts does not apply to {args.model}")
    if args.levels is not None and args.model != "ple":
        raise UsageError(f"--levels only applies to ple, not {args.model}")
    if getattr(args, "ablate", None) and args.model != "fdn":
        raise UsageError(f"--ablate only applies to fdn, not {args.model}")


def _build_spec(args: argparse.Namespace, schema: Schema) -> ModelSpec:
    kwargs = dict(
        kind=args.model,
        task_kinds=schema.task_kinds,
        n_dense=len(schema.dense_fields),
        categorical_vocabs=tuple(v for _, v in schema.categorical_fields),
        embedding_dim=schema.embedding_dim,
    )
    if args.model in ("mmoe", "cgc", "ple") and args.experts is not None:
        kwargs["num_experts"] = args.experts
    if args.model == "ple":
        kwargs["levels"] = args.levels if args.levels is not None else 2
    if args.model == "fdn" and args.dcp is not None:
        kwargs["dcps_per_task"] = args.dcp
    return ModelSpec(**kwargs)


def _load_dataset(data_path: str, schema_path: str):
    schema = _load_schema(schema_path)
    dataset, skipped = load_csv(data_path, schema)
    if skipped:
        print(f"note: skipped {skipped} malformed rows", file=sys.stderr)
    return dataset


def cmd_gen_data(args: argparse.Namespace) -> int:
    config = _from_flags(lambda: default_config(
        n_samples=args.n, seed=args.seed, d=args.d, m=args.m,
        c1=args.c1, c2=args.c2, cs=args.cs))
    dataset = generate(config, args.kind)
    csv_path, meta_path = write_csv(dataset, config, args.kind, args.out)
    print(csv_path)
    print(meta_path)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    _check_model_flags(args)
    schema = _load_schema(args.schema)
    dataset, skipped = load_csv(args.data, schema)
    if skipped:
        print(f"note: skipped {skipped} malformed rows", file=sys.stderr)
    spec = _from_flags(lambda: _build_spec(args, schema))
    ablate = set(args.ablate or [])
    config = _from_flags(lambda: TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        seed=args.seed,
        ablate_orth="orth" in ablate,
        ablate_aux="aux" in ablate,
        ablate_shared_fusion="shared" in ablate,
    ))
    params, report = train(spec, dataset, config)
    if args.ckpt:
        save_checkpoint(effective_spec(spec, config), params, args.ckpt)
    if args.report:
        doc = report.to_json_dict()
        del doc["wall_time_s"]  # keep report files reproducible
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    print(json.dumps({
        "model": report.model_kind,
        "final_metrics": [dataclasses.asdict(m) for m in report.final_metrics],
    }))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    spec, params = load_checkpoint(args.ckpt)
    dataset = _load_dataset(args.data, args.schema)
    metrics = evaluate(spec, params, dataset)
    print(json.dumps([dataclasses.asdict(m) for m in metrics]))
    return 0


def cmd_param_count(args: argparse.Namespace) -> int:
    if args.ckpt:
        spec, _ = load_checkpoint(args.ckpt)
    elif args.model and args.schema:
        _check_model_flags(args)
        schema = _load_schema(args.schema)
        spec = _from_flags(lambda: _build_spec(args, schema))
    else:
        raise UsageError("param-count needs either --ckpt or --model with --schema")
    print(param_count(spec))
    return 0


def cmd_export_features(args: argparse.Namespace) -> int:
    spec, params = load_checkpoint(args.ckpt)
    dataset = _load_dataset(args.data, args.schema)
    written = export_features(spec, params, dataset, args.out,
                              max_rows=args.max_rows)
    print(f"{written} rows -> {args.out}")
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    config = _from_flags(lambda: BenchmarkConfig(
        d=args.d,
        m=args.m,
        n_train=args.trainrows,
        n_test=args.testrows,
        data_seed=args.data_seed,
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        seeds=tuple(range(1, args.seeds + 1)),
        expert_hidden=tuple(int(w) for w in args.expert_hidden.split(",")),
        tower_hidden=args.tower_hidden,
    ))
    workers = int(os.environ.get("FDN_THREADS", os.cpu_count() or 1))
    log = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else None
    result = run_benchmark(config, log=log, max_workers=workers)
    for path in write_csvs(result, args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdn",
        description="Multi-task learning toolkit: decomposition models, "
                    "synthetic benchmark, evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset CSV + sidecar")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--cs", type=float, default=1.0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a CSV dataset")
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True,
                   help="schema JSON (a gen-data sidecar also works)")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dcp", type=int, help="decomposition pairs per task (fdn)")
    p.add_argument("--experts", type=int, help="expert count (mmoe/cgc/ple)")
    p.add_argument("--levels", type=int, help="extraction levels (ple)")
    p.add_argument("--ablate", action="append", choices=ABLATE_CHOICES,
                   help="drop a component (fdn); repeatable")
    p.add_argument("--ckpt", help="write trained checkpoint here")
    p.add_argument("--report", help="write run report JSON here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a CSV dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("param-count", help="print exact trainable scalar count")
    p.add_argument("--ckpt")
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--schema")
    p.add_argument("--dcp", type=int)
    p.add_argument("--experts", type=int)
    p.add_argument("--levels", type=int)
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("export-features",
                       help="write per-expert feature CSV for a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-rows", type=int, default=None)
    p.set_defaults(func=cmd_export_features)

    p = sub.add_parser("benchmark-synthetic",
                       help="oracle-gap study over seeds 1..k; writes CSVs")
    p.add_argument("--seeds", type=int, default=5, help="run seeds 1..k")
    p.add_argument("--out", required=True)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--trainrows", type=int, default=50_000)
    p.add_argument("--testrows", type=int, default=10_000)
    p.add_argument("--data-seed", type=int, default=8)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--expert-hidden", default="128,64",
                   help="comma-separated expert layer widths")
    p.add_argument("--tower-hidden", type=int, default=32)
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")
    p.set_defaults(func=cmd_benchmark)

    return parser


def entrypoint(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DataError, CheckpointError, UndefinedMetricError, DivergenceError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(entrypoint())
