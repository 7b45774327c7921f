"""Training loop, evaluation, decomposition diagnostics and feature export."""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, backward
from .dataio import Batch, DataError, Dataset, batches
from .losses import (
    LossWeights,
    ORTH_MODES,
    aux_loss,
    orth_loss,
    task_loss,
    total_loss,
    zero_scalar,
)
from .metrics import auc, mse
from .models import (
    ModelSpec,
    ParamSet,
    embed,
    expert_features,
    forward,
    init_params,
    param_count,
)
from .rng import derive_seed

OPTIMIZERS = ("adam", "sgd")

_TAG_SHUFFLE = 301


class DivergenceError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 1024
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)
    orth_mode: str = "gram"
    ablate_orth: bool = False
    ablate_aux: bool = False
    ablate_shared_fusion: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            raise ValueError("adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ValueError(f"adam_eps must be positive, got {self.adam_eps}")
        if self.orth_mode not in ORTH_MODES:
            raise ValueError(f"unknown orth_mode {self.orth_mode!r}")

    def effective_weights(self) -> LossWeights:
        """Loss weights after applying the ablation switches."""
        w = self.loss_weights
        return LossWeights(
            w_task=w.w_task,
            w_orth=0.0 if self.ablate_orth else w.w_orth,
            w_aux=0.0 if self.ablate_aux else w.w_aux,
        )

    def to_json_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["loss_weights"] = dataclasses.asdict(self.loss_weights)
        return out

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["loss_weights"] = LossWeights(**d["loss_weights"])
        return cls(**d)


def effective_spec(spec: ModelSpec, config: TrainConfig) -> ModelSpec:
    """Spec actually trained: shared-fusion ablation narrows the fusion scope."""
    if config.ablate_shared_fusion:
        if spec.kind != "fdn":
            raise ValueError("ablate_shared_fusion only applies to fdn models")
        return dataclasses.replace(spec, fusion_scope="own_shared")
    return spec


@dataclass
class EpochLosses:
    total: float
    task: float
    orth: float
    aux: float


@dataclass
class TaskMetric:
    name: str
    metric: str
    value: float


@dataclass
class RunReport:
    model_kind: str
    seed: int
    param_count: int
    epoch_losses: list[EpochLosses]
    final_metrics: list[TaskMetric]
    wall_time_s: float
    config_echo: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "seed": self.seed,
            "param_count": self.param_count,
            "epoch_losses": [dataclasses.asdict(e) for e in self.epoch_losses],
            "final_metrics": [dataclasses.asdict(m) for m in self.final_metrics],
            "wall_time_s": self.wall_time_s,
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


class Sgd:
    def __init__(self, params: ParamSet, learning_rate: float):
        self.nodes = params.nodes()
        self.learning_rate = learning_rate

    def step(self) -> None:
        for node in self.nodes:
            if node._grad is not None:
                node.value.data -= self.learning_rate * node._grad


class Adam:
    def __init__(self, params: ParamSet, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.nodes = params.nodes()
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(n.value.data) for n in self.nodes]
        self.v = [np.zeros_like(n.value.data) for n in self.nodes]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for node, m, v in zip(self.nodes, self.m, self.v):
            if node._grad is None:
                continue
            g = node._grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            node.value.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(config: TrainConfig, params: ParamSet):
    if config.optimizer == "sgd":
        return Sgd(params, config.learning_rate)
    return Adam(params, config.learning_rate,
                config.adam_beta1, config.adam_beta2, config.adam_eps)


def _check_compatible(spec: ModelSpec, dataset: Dataset) -> None:
    if tuple(dataset.task_kinds) != spec.task_kinds:
        raise DataError(
            f"dataset task kinds {tuple(dataset.task_kinds)} "
            f"do not match spec {spec.task_kinds}")
    if dataset.dense.shape[1] != spec.n_dense:
        raise DataError(
            f"dataset has {dataset.dense.shape[1]} dense fields, "
            f"spec expects {spec.n_dense}")
    if dataset.categorical.shape[1] != len(spec.categorical_vocabs):
        raise DataError(
            f"dataset has {dataset.categorical.shape[1]} categorical fields, "
            f"spec expects {len(spec.categorical_vocabs)}")


def _batch_losses(spec: ModelSpec, params: ParamSet, batch: Batch,
                  weights: LossWeights, orth_mode: str) -> tuple[Node, Node, Node, Node]:
    x = embed(spec, params, batch)
    out = forward(spec, params, x)
    l_task = task_loss(out.logits, batch.labels, spec.task_kinds)
    if spec.kind == "fdn" and weights.w_orth > 0:
        l_orth = orth_loss(out.shared_features, out.specific_features, mode=orth_mode)
    else:
        l_orth = zero_scalar()
    if out.aux_logits and weights.w_aux > 0:
        l_aux = aux_loss(out.aux_logits, batch.labels, spec.task_kinds)
    else:
        l_aux = zero_scalar()
    return total_loss(l_task, l_orth, l_aux, weights), l_task, l_orth, l_aux


def train(spec: ModelSpec, dataset: Dataset,
          config: TrainConfig | None = None) -> tuple[ParamSet, RunReport]:
    """Fit from a fresh init; returns trained parameters and a run report.

    Same spec, dataset and config always produce identical parameters and an
    identical report apart from wall_time_s.
    """
    config = config or TrainConfig()
    spec = effective_spec(spec, config)
    _check_compatible(spec, dataset)
    params = init_params(spec, config.seed)
    optimizer = _make_optimizer(config, params)
    weights = config.effective_weights()
    start = time.perf_counter()

    epoch_losses = []
    for epoch in range(config.epochs):
        shuffle_seed = derive_seed(config.seed, _TAG_SHUFFLE, epoch)
        sums = np.zeros(4)
        n_batches = 0
        for b_idx, batch in enumerate(
                batches(dataset, config.batch_size, shuffle_seed=shuffle_seed)):
            l_total, l_task, l_orth, l_aux = _batch_losses(
                spec, params, batch, weights, config.orth_mode)
            value = float(l_total.value.data[0, 0])
            if not np.isfinite(value):
                raise DivergenceError(
                    f"non-finite loss {value} at epoch {epoch}, batch {b_idx}")
            if config.learning_rate > 0:
                params.zero_grads()
                backward(l_total)
                optimizer.step()
            sums += (value, float(l_task.value.data[0, 0]),
                     float(l_orth.value.data[0, 0]), float(l_aux.value.data[0, 0]))
            n_batches += 1
        means = sums / n_batches
        epoch_losses.append(EpochLosses(*means))

    final_metrics = evaluate(spec, params, dataset)
    report = RunReport(
        model_kind=spec.kind,
        seed=config.seed,
        param_count=param_count(spec),
        epoch_losses=epoch_losses,
        final_metrics=final_metrics,
        wall_time_s=time.perf_counter() - start,
        config_echo={
            "train_config": config.to_json_dict(),
            "effective_weights": dataclasses.asdict(weights),
            "model_spec": spec.to_json_dict(),
        },
    )
    return params, report


def predict(spec: ModelSpec, params: ParamSet, dataset: Dataset,
            batch_size: int = 4096) -> list[np.ndarray]:
    """Per-task predictions in dataset order (post-sigmoid for binary tasks)."""
    _check_compatible(spec, dataset)
    chunks: list[list[np.ndarray]] = [[] for _ in range(spec.n_tasks)]
    for batch in batches(dataset, batch_size, shuffle_seed=None):
        out = forward(spec, params, embed(spec, params, batch))
        for k, pred in enumerate(out.predictions):
            chunks[k].append(pred.value.data[:, 0].copy())
    return [np.concatenate(c) for c in chunks]


def evaluate(spec: ModelSpec, params: ParamSet, dataset: Dataset,
             batch_size: int = 4096) -> list[TaskMetric]:
    """MSE for regression tasks, AUC for binary tasks, on the full dataset."""
    preds = predict(spec, params, dataset, batch_size=batch_size)
    names = [f"task{k}" for k in range(spec.n_tasks)]
    out = []
    for name, kind, pred, labels in zip(names, spec.task_kinds, preds, dataset.labels):
        if kind == "binary":
            out.append(TaskMetric(name, "auc", auc(pred, labels)))
        else:
            out.append(TaskMetric(name, "mse", mse(pred, labels)))
    return out


@dataclass
class OrthDiagnostic:
    """Mean absolute row cosine between each pair's shared and specific features."""
    per_pair: dict[str, float]
    excluded_rows: int

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.per_pair.values())))


def orthogonality_diagnostic(spec: ModelSpec, params: ParamSet, dataset: Dataset,
                             max_rows: int = 2048) -> OrthDiagnostic:
    """How aligned the shared and specific representations are, per pair.

    0 means every row of the shared output is orthogonal to the paired
    specific output; 1 means perfectly aligned. Rows where either side is the
    zero vector carry no direction and are excluded (counted).
    """
    if spec.kind != "fdn":
        raise ValueError(f"diagnostic only applies to fdn models, got {spec.kind!r}")
    _check_compatible(spec, dataset)
    n = min(dataset.n, max_rows)
    head = dataset.rows(np.arange(n))
    batch = Batch(dense=head.dense, categorical=head.categorical, labels=head.labels)
    out = forward(spec, params, embed(spec, params, batch))
    per_pair: dict[str, float] = {}
    excluded = 0
    for k in range(spec.n_tasks):
        for m in range(spec.dcps_per_task):
            s = out.shared_features[k][m].value.data
            p = out.specific_features[k][m].value.data
            ns = np.linalg.norm(s, axis=1)
            npn = np.linalg.norm(p, axis=1)
            valid = (ns > 0) & (npn > 0)
            excluded += int((~valid).sum())
            dots = np.abs(np.sum(s[valid] * p[valid], axis=1))
            cosines = dots / (ns[valid] * npn[valid])
            per_pair[f"task{k}/dcp{m}"] = float(cosines.mean()) if valid.any() else 0.0
    return OrthDiagnostic(per_pair=per_pair, excluded_rows=excluded)


def export_features(spec: ModelSpec, params: ParamSet, dataset: Dataset, path,
                    max_rows: int | None = None, batch_size: int = 4096) -> int:
    """Write every expert's output per row to CSV; returns rows written.

    Columns: task (-1 for experts serving all tasks), index, role, then one
    column per feature dimension. Rows grouped by expert, dataset order
    within each group. Deterministic for fixed params and dataset.
    """
    _check_compatible(spec, dataset)
    n = dataset.n if max_rows is None else min(dataset.n, max_rows)
    subset = dataset.rows(np.arange(n))

    blocks: list[tuple[int, int, str, list[np.ndarray]]] = []
    for batch in batches(subset, batch_size, shuffle_seed=None):
        tagged = expert_features(spec, params, embed(spec, params, batch))
        if not blocks:
            blocks = [(t, i, role, []) for t, i, role, _ in tagged]
        for (_, _, _, chunks), (_, _, _, node) in zip(blocks, tagged):
            chunks.append(node.value.data.copy())

    written = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        width = blocks[0][3][0].shape[1]
        header = ["task", "index", "role"] + [f"c{j}" for j in range(width)]
        fh.write(",".join(header) + "\n")
        for task_id, index, role, chunks in blocks:
            feats = np.concatenate(chunks, axis=0)
            for row in feats:
                cells = [str(task_id), str(index), role]
                cells += [repr(float(v)) for v in row]
                fh.write(",".join(cells) + "\n")
                written += 1
    return written
