"""Model zoo sharing one forward-pass interface.

Five architectures over a common expert building block (two affine layers
with ReLU): independent single-task networks, a shared expert pool with
per-task softmax gates (mmoe), per-task specific plus shared experts under
one gate (cgc), stacked cgc levels with an extra shared path at the
intermediate levels (ple), and decomposition pairs (fdn).

An fdn task owns M pairs; each pair holds a task-shared expert, a
task-specific expert and an auxiliary head predicting the task's label from
the specific features alone. The prediction input concatenates the task's M
specific outputs with the shared outputs of every pair of every task
("all_shared" scope; "own_shared" restricts to the task's own pairs), and a
single affine layer maps it to the output. fdn uses no tower; the gated
baselines keep a one-hidden-layer tower per task.

Parameters live in a ParamSet keyed by path-like names; declaration order
is fixed per (kind, shape) and is the serialization order of checkpoints.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .dataio import TASK_KINDS, Batch
from .matrix import Matrix, ShapeError
from .rng import Rng, derive_seed

MODEL_KINDS = ("single", "mmoe", "cgc", "ple", "fdn")
FUSION_SCOPES = ("all_shared", "own_shared")

_TAG_INIT = 201

_MAGIC = b"FDN1"


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    task_kinds: tuple[str, ...]
    n_dense: int
    categorical_vocabs: tuple[int, ...] = ()
    embedding_dim: int = 8
    expert_hidden: tuple[int, int] = (128, 64)
    tower_hidden: int = 32
    num_experts: int = 8      # mmoe pool size; cgc/ple per-task gate width
    levels: int = 1           # ple only
    dcps_per_task: int = 2    # fdn only
    fusion_scope: str = "all_shared"

    def __post_init__(self):
        object.__setattr__(self, "task_kinds", tuple(self.task_kinds))
        object.__setattr__(self, "categorical_vocabs",
                           tuple(int(v) for v in self.categorical_vocabs))
        object.__setattr__(self, "expert_hidden", tuple(self.expert_hidden))
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.task_kinds:
            raise ValueError("need at least one task")
        for k in self.task_kinds:
            if k not in TASK_KINDS:
                raise ValueError(f"unknown task kind {k!r}")
        if self.n_dense < 0:
            raise ValueError("n_dense must be >= 0")
        if self.input_width < 1:
            raise ValueError("model input width must be >= 1")
        if any(v < 1 for v in self.categorical_vocabs) or self.embedding_dim < 1:
            raise ValueError("vocabularies and embedding_dim must be >= 1")
        if len(self.expert_hidden) != 2 or any(h < 1 for h in self.expert_hidden):
            raise ValueError("expert_hidden must be two positive widths")
        if self.num_experts < 1 or self.levels < 1 or self.dcps_per_task < 1:
            raise ValueError("num_experts, levels and dcps_per_task must be >= 1")
        if self.tower_hidden < 1:
            raise ValueError("tower_hidden must be >= 1")
        if self.fusion_scope not in FUSION_SCOPES:
            raise ValueError(f"unknown fusion scope {self.fusion_scope!r}")
        if self.kind != "ple" and self.levels != 1:
            raise ValueError(f"levels > 1 requires kind 'ple', got {self.kind!r}")

    @property
    def n_tasks(self) -> int:
        return len(self.task_kinds)

    @property
    def input_width(self) -> int:
        return self.n_dense + len(self.categorical_vocabs) * self.embedding_dim

    @property
    def specific_per_task(self) -> int:
        """cgc/ple split of the per-task gate width: specific half..."""
        return (self.num_experts + 1) // 2

    @property
    def shared_pool(self) -> int:
        """...and shared half (the smaller half when num_experts is odd)."""
        return self.num_experts - self.specific_per_task

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "task_kinds": list(self.task_kinds),
            "n_dense": self.n_dense,
            "categorical_vocabs": list(self.categorical_vocabs),
            "embedding_dim": self.embedding_dim,
            "expert_hidden": list(self.expert_hidden),
            "tower_hidden": self.tower_hidden,
            "num_experts": self.num_experts,
            "levels": self.levels,
            "dcps_per_task": self.dcps_per_task,
            "fusion_scope": self.fusion_scope,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            kind=d["kind"],
            task_kinds=tuple(d["task_kinds"]),
            n_dense=int(d["n_dense"]),
            categorical_vocabs=tuple(d.get("categorical_vocabs", [])),
            embedding_dim=int(d.get("embedding_dim", 8)),
            expert_hidden=tuple(d.get("expert_hidden", [128, 64])),
            tower_hidden=int(d.get("tower_hidden", 32)),
            num_experts=int(d.get("num_experts", 8)),
            levels=int(d.get("levels", 1)),
            dcps_per_task=int(d.get("dcps_per_task", 2)),
            fusion_scope=d.get("fusion_scope", "all_shared"),
        )


class ParamSet:
    """Named parameter nodes in declaration order (the checkpoint order)."""

    def __init__(self) -> None:
        self._nodes: dict[str, Node] = {}

    def add(self, name: str, value: Matrix) -> Node:
        if name in self._nodes:
            raise ValueError(f"duplicate parameter name {name!r}")
        node = ad.parameter(value)
        self._nodes[name] = node
        return node

    def __getitem__(self, name: str) -> Node:
        return self._nodes[name]

    def __contains__(self, name: str) -> bool:
        return name in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def names(self) -> tuple[str, ...]:
        return tuple(self._nodes)

    def nodes(self) -> list[Node]:
        return list(self._nodes.values())

    def items(self):
        return self._nodes.items()

    def n_scalars(self) -> int:
        return sum(n.value.data.size for n in self._nodes.values())

    def zero_grads(self) -> None:
        for n in self._nodes.values():
            n.zero_grad()

    def state_vector(self) -> np.ndarray:
        return np.concatenate([n.value.data.ravel() for n in self._nodes.values()])

    def load_vector(self, vec: np.ndarray) -> None:
        if vec.size != self.n_scalars():
            raise ShapeError(f"state vector has {vec.size} entries, expected {self.n_scalars()}")
        at = 0
        for node in self._nodes.values():
            size = node.value.data.size
            node.value.data[...] = vec[at:at + size].reshape(node.value.shape)
            at += size


@dataclass
class ForwardOutput:
    """Per-task outputs of one forward pass.

    predictions hold the post-activation values; logits the pre-activation
    ones (losses consume logits so binary tasks can use the fused stable
    cross-entropy). aux_* and *_features are populated by fdn only, indexed
    [task][pair].
    """

    predictions: list[Node]
    logits: list[Node]
    aux_predictions: list[list[Node]] = field(default_factory=list)
    aux_logits: list[list[Node]] = field(default_factory=list)
    shared_features: list[list[Node]] = field(default_factory=list)
    specific_features: list[list[Node]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# initialization


def _glorot(rng: Rng, fan_in: int, fan_out: int) -> Matrix:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform_matrix(fan_in, fan_out, -bound, bound)


def _init_affine(ps: ParamSet, rng: Rng, name: str, fan_in: int, fan_out: int) -> None:
    ps.add(f"{name}/w", _glorot(rng, fan_in, fan_out))
    ps.add(f"{name}/b", Matrix.zeros(1, fan_out))


def _init_expert(ps: ParamSet, rng: Rng, name: str, fan_in: int,
                 hidden: tuple[int, int]) -> None:
    _init_affine(ps, rng, f"{name}/l1", fan_in, hidden[0])
    _init_affine(ps, rng, f"{name}/l2", hidden[0], hidden[1])


def init_params(spec: ModelSpec, seed: int) -> ParamSet:
    """Glorot-uniform weights, zero biases, in a fixed declaration order."""
    rng = Rng(derive_seed(seed, _TAG_INIT))
    ps = ParamSet()
    for f, vocab in enumerate(spec.categorical_vocabs):
        ps.add(f"embed/f{f}", _glorot(rng, vocab, spec.embedding_dim))

    n, hidden = spec.input_width, spec.expert_hidden
    h2 = hidden[1]
    K = spec.n_tasks

    if spec.kind == "single":
        for k in range(K):
            _init_expert(ps, rng, f"task{k}/expert", n, hidden)
            _init_affine(ps, rng, f"task{k}/head", h2, 1)
    elif spec.kind == "mmoe":
        for e in range(spec.num_experts):
            _init_expert(ps, rng, f"expert{e}", n, hidden)
        for k in range(K):
            _init_affine(ps, rng, f"task{k}/gate", n, spec.num_experts)
            _init_affine(ps, rng, f"task{k}/tower", h2, spec.tower_hidden)
            _init_affine(ps, rng, f"task{k}/head", spec.tower_hidden, 1)
    elif spec.kind in ("cgc", "ple"):
        levels = spec.levels if spec.kind == "ple" else 1
        for lvl in range(levels):
            fan_in = n if lvl == 0 else h2
            for k in range(K):
                for e in range(spec.specific_per_task):
                    _init_expert(ps, rng, f"level{lvl}/task{k}/specific{e}", fan_in, hidden)
            for e in range(spec.shared_pool):
                _init_expert(ps, rng, f"level{lvl}/shared{e}", fan_in, hidden)
            for k in range(K):
                _init_affine(ps, rng, f"level{lvl}/task{k}/gate", fan_in, spec.num_experts)
            if lvl < levels - 1:
                _init_affine(ps, rng, f"level{lvl}/shared_gate", fan_in,
                             K * spec.specific_per_task + spec.shared_pool)
        for k in range(K):
            _init_affine(ps, rng, f"task{k}/tower", h2, spec.tower_hidden)
            _init_affine(ps, rng, f"task{k}/head", spec.tower_hidden, 1)
    elif spec.kind == "fdn":
        M = spec.dcps_per_task
        for k in range(K):
            for m in range(M):
                _init_expert(ps, rng, f"task{k}/dcp{m}/shared", n, hidden)
                _init_expert(ps, rng, f"task{k}/dcp{m}/specific", n, hidden)
                _init_affine(ps, rng, f"task{k}/dcp{m}/aux", h2, 1)
        shared_in = K * M * h2 if spec.fusion_scope == "all_shared" else M * h2
        for k in range(K):
            _init_affine(ps, rng, f"task{k}/head", M * h2 + shared_in, 1)
    return ps


# ---------------------------------------------------------------------------
# forward passes


def _affine(ps: ParamSet, name: str, x: Node) -> Node:
    return ad.add_bias(ad.matmul(x, ps[f"{name}/w"]), ps[f"{name}/b"])


def _expert(ps: ParamSet, name: str, x: Node) -> Node:
    h = ad.relu(_affine(ps, f"{name}/l1", x))
    return ad.relu(_affine(ps, f"{name}/l2", h))


def _gate_mix(ps: ParamSet, gate_name: str, gate_input: Node,
              expert_outs: list[Node]) -> Node:
    """Softmax-weighted sum of expert outputs; weights conditioned on gate_input."""
    gates = ad.softmax_rows(_affine(ps, gate_name, gate_input))
    mixed = None
    for e, out in enumerate(expert_outs):
        term = ad.scale_rows(out, ad.slice_cols(gates, e, e + 1))
        mixed = term if mixed is None else ad.add(mixed, term)
    return mixed


def _activate(logit: Node, task_kind: str) -> Node:
    return ad.sigmoid(logit) if task_kind == "binary" else logit


def embed(spec: ModelSpec, params: ParamSet, batch: Batch) -> Node:
    """Input representation: dense columns then one embedding row per
    categorical field, concatenated."""
    parts: list[Node] = []
    if spec.n_dense:
        if batch.dense.shape[1] != spec.n_dense:
            raise ShapeError(f"batch has {batch.dense.shape[1]} dense columns, "
                             f"spec expects {spec.n_dense}")
        parts.append(ad.constant(Matrix.wrap(np.ascontiguousarray(batch.dense, dtype=np.float64))))
    if len(spec.categorical_vocabs) != batch.categorical.shape[1]:
        raise ShapeError(f"batch has {batch.categorical.shape[1]} categorical columns, "
                         f"spec expects {len(spec.categorical_vocabs)}")
    for f in range(len(spec.categorical_vocabs)):
        parts.append(ad.gather_rows(params[f"embed/f{f}"], batch.categorical[:, f]))
    return parts[0] if len(parts) == 1 else ad.concat_cols(parts)


def _forward_single(spec: ModelSpec, ps: ParamSet, x: Node) -> ForwardOutput:
    logits = [_affine(ps, f"task{k}/head", _expert(ps, f"task{k}/expert", x))
              for k in range(spec.n_tasks)]
    preds = [_activate(z, kind) for z, kind in zip(logits, spec.task_kinds)]
    return ForwardOutput(predictions=preds, logits=logits)


def _tower_head(spec: ModelSpec, ps: ParamSet, k: int, mixed: Node) -> Node:
    t = ad.relu(_affine(ps, f"task{k}/tower", mixed))
    return _affine(ps, f"task{k}/head", t)


def _forward_mmoe(spec: ModelSpec, ps: ParamSet, x: Node) -> ForwardOutput:
    expert_outs = [_expert(ps, f"expert{e}", x) for e in range(spec.num_experts)]
    logits = []
    for k in range(spec.n_tasks):
        mixed = _gate_mix(ps, f"task{k}/gate", x, expert_outs)
        logits.append(_tower_head(spec, ps, k, mixed))
    preds = [_activate(z, kind) for z, kind in zip(logits, spec.task_kinds)]
    return ForwardOutput(predictions=preds, logits=logits)


def _forward_cgc_ple(spec: ModelSpec, ps: ParamSet, x: Node) -> ForwardOutput:
    levels = spec.levels if spec.kind == "ple" else 1
    K = spec.n_tasks
    task_inputs = [x] * K
    shared_input = x
    for lvl in range(levels):
        specific_outs = [[_expert(ps, f"level{lvl}/task{k}/specific{e}", task_inputs[k])
                          for e in range(spec.specific_per_task)] for k in range(K)]
        shared_outs = [_expert(ps, f"level{lvl}/shared{e}", shared_input)
                       for e in range(spec.shared_pool)]
        next_task = [
            _gate_mix(ps, f"level{lvl}/task{k}/gate", task_inputs[k],
                      specific_outs[k] + shared_outs)
            for k in range(K)
        ]
        if lvl < levels - 1:
            all_outs = [out for outs in specific_outs for out in outs] + shared_outs
            shared_input = _gate_mix(ps, f"level{lvl}/shared_gate", shared_input, all_outs)
        task_inputs = next_task
    logits = [_tower_head(spec, ps, k, task_inputs[k]) for k in range(K)]
    preds = [_activate(z, kind) for z, kind in zip(logits, spec.task_kinds)]
    return ForwardOutput(predictions=preds, logits=logits)


def _forward_fdn(spec: ModelSpec, ps: ParamSet, x: Node) -> ForwardOutput:
    K, M = spec.n_tasks, spec.dcps_per_task
    shared = [[_expert(ps, f"task{k}/dcp{m}/shared", x) for m in range(M)]
              for k in range(K)]
    specific = [[_expert(ps, f"task{k}/dcp{m}/specific", x) for m in range(M)]
                for k in range(K)]
    aux_logits = [[_affine(ps, f"task{k}/dcp{m}/aux", specific[k][m]) for m in range(M)]
                  for k in range(K)]
    logits = []
    for k in range(K):
        if spec.fusion_scope == "all_shared":
            shared_parts = [s for row in shared for s in row]
        else:
            shared_parts = shared[k]
        fused = ad.concat_cols(specific[k] + shared_parts)
        logits.append(_affine(ps, f"task{k}/head", fused))
    preds = [_activate(z, kind) for z, kind in zip(logits, spec.task_kinds)]
    aux_preds = [[_activate(z, kind) for z in row]
                 for row, kind in zip(aux_logits, spec.task_kinds)]
    return ForwardOutput(predictions=preds, logits=logits,
                         aux_predictions=aux_preds, aux_logits=aux_logits,
                         shared_features=shared, specific_features=specific)


_FORWARDS = {
    "single": _forward_single,
    "mmoe": _forward_mmoe,
    "cgc": _forward_cgc_ple,
    "ple": _forward_cgc_ple,
    "fdn": _forward_fdn,
}


def forward(spec: ModelSpec, params: ParamSet, x: Node) -> ForwardOutput:
    if x.value.cols != spec.input_width:
        raise ShapeError(f"input width {x.value.cols}, spec expects {spec.input_width}")
    return _FORWARDS[spec.kind](spec, params, x)


def expert_features(spec: ModelSpec, params: ParamSet, x: Node) \
        -> list[tuple[int, int, str, Node]]:
    """Every expert's output on x, tagged (task, index, role).

    task is -1 for experts serving all tasks (mmoe pool, cgc/ple shared).
    fdn pairs report roles "shared"/"specific"; gated baselines report the
    final level's experts; single-task reports its one expert per task.
    """
    K = spec.n_tasks
    tagged: list[tuple[int, int, str, Node]] = []
    if spec.kind == "single":
        for k in range(K):
            tagged.append((k, 0, "expert", _expert(params, f"task{k}/expert", x)))
    elif spec.kind == "mmoe":
        for e in range(spec.num_experts):
            tagged.append((-1, e, "expert", _expert(params, f"expert{e}", x)))
    elif spec.kind in ("cgc", "ple"):
        levels = spec.levels if spec.kind == "ple" else 1
        task_inputs = [x] * K
        shared_input = x
        for lvl in range(levels - 1):
            specific_outs = [[_expert(params, f"level{lvl}/task{k}/specific{e}", task_inputs[k])
                              for e in range(spec.specific_per_task)] for k in range(K)]
            shared_outs = [_expert(params, f"level{lvl}/shared{e}", shared_input)
                           for e in range(spec.shared_pool)]
            task_inputs = [_gate_mix(params, f"level{lvl}/task{k}/gate", task_inputs[k],
                                     specific_outs[k] + shared_outs) for k in range(K)]
            everything = [o for row in specific_outs for o in row] + shared_outs
            shared_input = _gate_mix(params, f"level{lvl}/shared_gate", shared_input, everything)
        last = levels - 1
        for k in range(K):
            for e in range(spec.specific_per_task):
                tagged.append((k, e, "specific",
                               _expert(params, f"level{last}/task{k}/specific{e}", task_inputs[k])))
        for e in range(spec.shared_pool):
            tagged.append((-1, e, "shared",
                           _expert(params, f"level{last}/shared{e}", shared_input)))
    else:
        for k in range(K):
            for m in range(spec.dcps_per_task):
                tagged.append((k, m, "shared", _expert(params, f"task{k}/dcp{m}/shared", x)))
                tagged.append((k, m, "specific", _expert(params, f"task{k}/dcp{m}/specific", x)))
    return tagged


# ---------------------------------------------------------------------------
# parameter counting (analytic, no allocation)


def _affine_count(fan_in: int, fan_out: int) -> int:
    return fan_in * fan_out + fan_out


def _expert_count(fan_in: int, hidden: tuple[int, int]) -> int:
    return _affine_count(fan_in, hidden[0]) + _affine_count(hidden[0], hidden[1])


def param_count(spec: ModelSpec) -> int:
    """Exact scalar parameter count, including embedding tables."""
    total = sum(v * spec.embedding_dim for v in spec.categorical_vocabs)
    n, hidden = spec.input_width, spec.expert_hidden
    h2 = hidden[1]
    K = spec.n_tasks
    if spec.kind == "single":
        total += K * (_expert_count(n, hidden) + _affine_count(h2, 1))
    elif spec.kind == "mmoe":
        total += spec.num_experts * _expert_count(n, hidden)
        total += K * (_affine_count(n, spec.num_experts)
                      + _affine_count(h2, spec.tower_hidden)
                      + _affine_count(spec.tower_hidden, 1))
    elif spec.kind in ("cgc", "ple"):
        levels = spec.levels if spec.kind == "ple" else 1
        for lvl in range(levels):
            fan_in = n if lvl == 0 else h2
            n_experts = K * spec.specific_per_task + spec.shared_pool
            total += n_experts * _expert_count(fan_in, hidden)
            total += K * _affine_count(fan_in, spec.num_experts)
            if lvl < levels - 1:
                total += _affine_count(fan_in, n_experts)
        total += K * (_affine_count(h2, spec.tower_hidden)
                      + _affine_count(spec.tower_hidden, 1))
    elif spec.kind == "fdn":
        M = spec.dcps_per_task
        total += K * M * (2 * _expert_count(n, hidden) + _affine_count(h2, 1))
        shared_in = K * M * h2 if spec.fusion_scope == "all_shared" else M * h2
        total += K * _affine_count(M * h2 + shared_in, 1)
    return total


# ---------------------------------------------------------------------------
# checkpoints


def _canonical_spec_bytes(spec: ModelSpec) -> bytes:
    return json.dumps(spec.to_json_dict(), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def save_checkpoint(spec: ModelSpec, params: ParamSet, path: str | Path) -> None:
    """Binary layout: magic, u32 spec-JSON length, spec JSON, sha256 of the
    JSON, every parameter as little-endian float64 in declaration order,
    then sha256 of the parameter bytes."""
    blob = _canonical_spec_bytes(spec)
    payload = params.state_vector().astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(hashlib.sha256(blob).digest())
        fh.write(payload)
        fh.write(hashlib.sha256(payload).digest())


class CheckpointError(ValueError):
    """Raised for corrupt or mismatched checkpoint files."""


def load_checkpoint(path: str | Path) -> tuple[ModelSpec, ParamSet]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (blob_len,) = struct.unpack("<I", raw[4:8])
    blob = raw[8:8 + blob_len]
    digest = raw[8 + blob_len:8 + blob_len + 32]
    if hashlib.sha256(blob).digest() != digest:
        raise CheckpointError(f"{path}: spec hash mismatch")
    spec = ModelSpec.from_json_dict(json.loads(blob.decode("utf-8")))
    params = init_params(spec, seed=0)
    payload = raw[8 + blob_len + 32:-32]
    vec = np.frombuffer(payload, dtype="<f8")
    if vec.size != params.n_scalars():
        raise CheckpointError(f"{path}: expected {params.n_scalars()} parameters, "
                              f"found {vec.size}")
    if hashlib.sha256(payload).digest() != raw[-32:]:
        raise CheckpointError(f"{path}: parameter hash mismatch")
    params.load_vector(vec.astype(np.float64))
    return spec, params
