"""Oracle-gap benchmark: single-task ceilings vs multi-task models.

Per seed, the three synthetic views share one latent stream: A and B carry
task-specific feature mixes and one label each, I carries the shared mix and
both labels. Single-task models trained on A and B set per-task oracle
scores; multi-task models see only I. The gap says how much of the oracle
each model recovers, in percent (negative = worse than oracle).
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .datagen import default_config, generate
from .losses import LossWeights
from .metrics import gap_vs_oracle
from .models import ModelSpec
from .training import (
    TrainConfig,
    effective_spec,
    evaluate,
    orthogonality_diagnostic,
    train,
)

MTL_KINDS = ("mmoe", "cgc", "ple", "fdn")
ABLATION_VARIANTS = ("full", "no_orth", "no_aux", "no_shared_fusion")

_ABLATION_FLAGS = {
    "no_orth": {"ablate_orth": True},
    "no_aux": {"ablate_aux": True},
    "no_shared_fusion": {"ablate_shared_fusion": True},
}


@dataclass(frozen=True)
class BenchmarkConfig:
    """Defaults reproduce the shipped ordering study.

    One fixed dataset (data_seed) with fresh init/shuffle per run seed, so
    run-to-run spread reflects training noise, not problem redraws.
    """
    d: int = 16
    m: int = 4
    n_train: int = 50_000
    n_test: int = 10_000
    data_seed: int = 8
    epochs: int = 5
    batch_size: int = 256
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    expert_hidden: tuple[int, ...] = (128, 64)
    tower_hidden: int = 32
    mmoe_experts: int = 8
    cgc_experts: int = 8
    ple_levels: int = 2
    ple_experts: int = 8
    fdn_dcps: int = 4
    w_orth: float = 0.1
    w_aux: float = 0.1
    orth_mode: str = "gram"

    def __post_init__(self) -> None:
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"duplicate seeds in {self.seeds}")

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


def oracle_spec(config: BenchmarkConfig) -> ModelSpec:
    return ModelSpec(
        kind="single",
        task_kinds=("regression",),
        n_dense=config.d,
        expert_hidden=config.expert_hidden,
        tower_hidden=config.tower_hidden,
    )


def model_spec(config: BenchmarkConfig, kind: str) -> ModelSpec:
    common = dict(
        kind=kind,
        task_kinds=("regression", "regression"),
        n_dense=config.d,
        expert_hidden=config.expert_hidden,
        tower_hidden=config.tower_hidden,
    )
    if kind == "mmoe":
        return ModelSpec(**common, num_experts=config.mmoe_experts)
    if kind == "cgc":
        return ModelSpec(**common, num_experts=config.cgc_experts)
    if kind == "ple":
        return ModelSpec(**common, num_experts=config.ple_experts,
                         levels=config.ple_levels)
    if kind == "fdn":
        return ModelSpec(**common, dcps_per_task=config.fdn_dcps)
    raise ValueError(f"unknown multi-task kind {kind!r}")


def _train_config(config: BenchmarkConfig, seed: int, **ablation) -> TrainConfig:
    return TrainConfig(
        epochs=config.epochs,
        batch_size=config.batch_size,
        optimizer=config.optimizer,
        learning_rate=config.learning_rate,
        seed=seed,
        loss_weights=LossWeights(w_task=1.0, w_orth=config.w_orth,
                                 w_aux=config.w_aux),
        orth_mode=config.orth_mode,
        **ablation,
    )


@dataclass
class SeedResult:
    seed: int
    oracle_mse: tuple[float, float]
    model_mse: dict[str, tuple[float, float]]
    model_gap: dict[str, tuple[float, float]]
    ablation_mse: dict[str, tuple[float, float]]
    orth_with: float
    orth_without: float


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    seed_results: list[SeedResult] = field(default_factory=list)

    def _median_over_seeds(self, pick) -> tuple[float, float]:
        pairs = [pick(r) for r in self.seed_results]
        return (float(np.median([p[0] for p in pairs])),
                float(np.median([p[1] for p in pairs])))

    def median_gap(self, kind: str) -> tuple[float, float]:
        return self._median_over_seeds(lambda r: r.model_gap[kind])

    def median_abs_gap(self, kind: str) -> tuple[float, float]:
        return self._median_over_seeds(
            lambda r: tuple(abs(g) for g in r.model_gap[kind]))

    def median_ablation_mse(self, variant: str) -> tuple[float, float]:
        return self._median_over_seeds(lambda r: r.ablation_mse[variant])

    def median_orth_ratio(self) -> float:
        ratios = [r.orth_with / r.orth_without for r in self.seed_results]
        return float(np.median(ratios))

    def iqr_gap(self, kind: str) -> tuple[float, float]:
        """Interquartile range of the signed gaps over seeds, per task."""
        pairs = [r.model_gap[kind] for r in self.seed_results]
        out = []
        for t in (0, 1):
            lo, hi = np.percentile([p[t] for p in pairs], [25.0, 75.0])
            out.append(float(hi - lo))
        return (out[0], out[1])


def make_views(config: BenchmarkConfig) -> dict:
    """Train/test split of each view, all from the configured data seed."""
    synth = default_config(n_samples=config.n_train + config.n_test,
                           seed=config.data_seed, d=config.d, m=config.m)
    return {kind: generate(synth, kind).split(config.n_train)
            for kind in ("A", "B", "I")}


def run_seed(config: BenchmarkConfig, seed: int, views: dict | None = None,
             log: Callable[[str], None] | None = None) -> SeedResult:
    say = log or (lambda _msg: None)
    if views is None:
        say(f"seed {seed}: generating {config.n_train + config.n_test} rows per view")
        views = make_views(config)

    oracle_mse = []
    for kind in ("A", "B"):
        tr, te = views[kind]
        spec = oracle_spec(config)
        params, _ = train(spec, tr, _train_config(config, seed))
        (metric,) = evaluate(spec, params, te)
        oracle_mse.append(metric.value)
        say(f"seed {seed}: oracle {kind} mse {metric.value:.4f}")
    oracle_mse = tuple(oracle_mse)

    tr_i, te_i = views["I"]
    model_mse: dict[str, tuple[float, float]] = {}
    model_gap: dict[str, tuple[float, float]] = {}
    orth_with = float("nan")
    for kind in MTL_KINDS:
        spec = model_spec(config, kind)
        params, _ = train(spec, tr_i, _train_config(config, seed))
        metrics = evaluate(spec, params, te_i)
        mses = (metrics[0].value, metrics[1].value)
        model_mse[kind] = mses
        model_gap[kind] = tuple(
            gap_vs_oracle(m, o, "mse") for m, o in zip(mses, oracle_mse))
        say(f"seed {seed}: {kind} mse {mses[0]:.4f}/{mses[1]:.4f} "
            f"gap {model_gap[kind][0]:+.2f}%/{model_gap[kind][1]:+.2f}%")
        if kind == "fdn":
            orth_with = orthogonality_diagnostic(spec, params, te_i).mean

    ablation_mse = {"full": model_mse["fdn"]}
    orth_without = float("nan")
    for variant in ABLATION_VARIANTS[1:]:
        spec = model_spec(config, "fdn")
        cfg = _train_config(config, seed, **_ABLATION_FLAGS[variant])
        params, _ = train(spec, tr_i, cfg)
        eff = effective_spec(spec, cfg)
        metrics = evaluate(eff, params, te_i)
        ablation_mse[variant] = (metrics[0].value, metrics[1].value)
        say(f"seed {seed}: fdn {variant} mse "
            f"{metrics[0].value:.4f}/{metrics[1].value:.4f}")
        if variant == "no_orth":
            orth_without = orthogonality_diagnostic(eff, params, te_i).mean

    return SeedResult(
        seed=seed,
        oracle_mse=oracle_mse,
        model_mse=model_mse,
        model_gap=model_gap,
        ablation_mse=ablation_mse,
        orth_with=orth_with,
        orth_without=orth_without,
    )


def run_benchmark(config: BenchmarkConfig | None = None,
                  log: Callable[[str], None] | None = None,
                  max_workers: int = 1) -> BenchmarkResult:
    """Runs every seed; seed runs are independent, so they may be threaded.

    Results are collected in seed order either way, keeping outputs
    deterministic regardless of completion order.
    """
    config = config or BenchmarkConfig()
    say = log or (lambda _msg: None)
    say(f"generating {config.n_train + config.n_test} rows per view "
        f"(data seed {config.data_seed})")
    views = make_views(config)
    result = BenchmarkResult(config=config)
    workers = max(1, min(max_workers, len(config.seeds)))
    if workers == 1:
        for seed in config.seeds:
            result.seed_results.append(run_seed(config, seed, views=views, log=log))
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            result.seed_results.extend(
                pool.map(lambda s: run_seed(config, s, views=views, log=log),
                         config.seeds))
    return result


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_csvs(result: BenchmarkResult, outdir: str | Path) -> list[Path]:
    """gaps.csv (medians), gap_spread.csv (IQRs), gaps_by_seed.csv,
    ablation.csv, orth_diagnostic.csv, benchmark_config.json.

    Values are repr round-trips, so repeated runs of the same configured
    benchmark produce byte-identical files.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    gaps = outdir / "gaps.csv"
    rows = [["oracle", _fmt(0.0), _fmt(0.0)]]
    for kind in MTL_KINDS:
        a, b = result.median_gap(kind)
        rows.append([kind, _fmt(a), _fmt(b)])
    _write_rows(gaps, ["model", "taskA_gap", "taskB_gap"], rows)

    spread = outdir / "gap_spread.csv"
    rows = [["oracle", _fmt(0.0), _fmt(0.0)]]
    for kind in MTL_KINDS:
        a, b = result.iqr_gap(kind)
        rows.append([kind, _fmt(a), _fmt(b)])
    _write_rows(spread, ["model", "taskA_gap_iqr", "taskB_gap_iqr"], rows)

    by_seed = outdir / "gaps_by_seed.csv"
    rows = []
    for r in result.seed_results:
        rows.append(["oracle", str(r.seed), _fmt(r.oracle_mse[0]),
                     _fmt(r.oracle_mse[1]), _fmt(0.0), _fmt(0.0)])
        for kind in MTL_KINDS:
            rows.append([kind, str(r.seed), _fmt(r.model_mse[kind][0]),
                         _fmt(r.model_mse[kind][1]), _fmt(r.model_gap[kind][0]),
                         _fmt(r.model_gap[kind][1])])
    _write_rows(by_seed, ["model", "seed", "taskA_mse", "taskB_mse",
                          "taskA_gap", "taskB_gap"], rows)

    ablation = outdir / "ablation.csv"
    rows = []
    for variant in ABLATION_VARIANTS:
        for r in result.seed_results:
            rows.append([variant, str(r.seed), _fmt(r.ablation_mse[variant][0]),
                         _fmt(r.ablation_mse[variant][1])])
        a, b = result.median_ablation_mse(variant)
        rows.append([variant, "median", _fmt(a), _fmt(b)])
    _write_rows(ablation, ["variant", "seed", "taskA_mse", "taskB_mse"], rows)

    orth = outdir / "orth_diagnostic.csv"
    rows = []
    for r in result.seed_results:
        rows.append([str(r.seed), _fmt(r.orth_with), _fmt(r.orth_without),
                     _fmt(r.orth_with / r.orth_without)])
    rows.append(["median", "", "", _fmt(result.median_orth_ratio())])
    _write_rows(orth, ["seed", "with_orth", "without_orth", "ratio"], rows)

    meta = outdir / "benchmark_config.json"
    with open(meta, "w", encoding="utf-8") as fh:
        json.dump(result.config.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    return [gaps, spread, by_seed, ablation, orth, meta]
