"""Multi-task learning toolkit: decomposition-pair networks, MoE baselines,
a synthetic benchmark generator, and a small autodiff core to run them on."""

from .benchmark import BenchmarkConfig, BenchmarkResult, run_benchmark, write_csvs
from .dataio import Batch, DataError, Dataset, Schema, batches, load_csv
from .datagen import SynthConfig, default_config, generate
from .losses import LossWeights, aux_loss, orth_loss, task_loss, total_loss
from .matrix import Matrix, ShapeError
from .metrics import UndefinedMetricError, auc, gap_vs_oracle, mse
from .models import (
    CheckpointError,
    ModelSpec,
    ParamSet,
    forward,
    init_params,
    load_checkpoint,
    param_count,
    save_checkpoint,
)
from .rng import Rng, derive_seed, sample_gaussian
from .training import (
    DivergenceError,
    RunReport,
    TrainConfig,
    evaluate,
    export_features,
    orthogonality_diagnostic,
    predict,
    train,
)

__all__ = [
    "Batch",
    "BenchmarkConfig",
    "BenchmarkResult",
    "CheckpointError",
    "DataError",
    "Dataset",
    "DivergenceError",
    "LossWeights",
    "Matrix",
    "ModelSpec",
    "ParamSet",
    "Rng",
    "RunReport",
    "Schema",
    "ShapeError",
    "SynthConfig",
    "TrainConfig",
    "UndefinedMetricError",
    "auc",
    "aux_loss",
    "batches",
    "default_config",
    "derive_seed",
    "evaluate",
    "export_features",
    "forward",
    "gap_vs_oracle",
    "generate",
    "init_params",
    "load_checkpoint",
    "load_csv",
    "mse",
    "orth_loss",
    "orthogonality_diagnostic",
    "param_count",
    "predict",
    "run_benchmark",
    "sample_gaussian",
    "save_checkpoint",
    "task_loss",
    "total_loss",
    "train",
    "write_csvs",
]

__version__ = "0.1.0"
