"""Synthetic two-task regression benchmark with known oracle structure.

One latent stream drives three dataset views. Per sample we draw latent
vectors x1 (componentwise N(-1, 0.1)), x2 (N(1, 0.1)), xs (N(0, 1)), then

    y1 = s + w1.x1 + sum_i sin(a_i * w1.x1 + b_i) + e1
    y2 = s + w2.x2 + sum_i sin(a_i * w2.x2 + b_i) + e2
    s  = ws.xs + sum_i sin(a_i * ws.xs + b_i)

with e1, e2 ~ N(0, 0.01). Features encode the latents through a fixed
sinusoid: component i of a sample is sin(delta_i * z_i + gamma_i) +
cos(delta_i * z_i + gamma_i) + e, where z mixes u1*x1 + us*xs (view A,
single-task A structure), u2*x2 + us*xs (view B) or all three (view I, the
multi-task dataset). Views A/B/I generated from the same seed share the
basis and every per-sample latent, so the single-task fits on A/B act as
per-task oracles for multi-task models trained on I.

Variances above follow the N(mean, variance) convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataio import Dataset, Schema
from .rng import Rng, derive_seed

KINDS = ("A", "B", "I")

X1_STD = math.sqrt(0.1)
X2_STD = math.sqrt(0.1)
XS_STD = 1.0
NOISE_STD = 0.1  # label and feature noise, N(0, 0.01)

# independent sub-stream tags under one user seed
_TAG_PARAMS = 101
_TAG_BASIS = 102
_TAG_SAMPLES = 103


@dataclass(frozen=True)
class SynthConfig:
    d: int
    m: int
    c1: float
    c2: float
    cs: float
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    delta: tuple[float, ...]
    gamma: tuple[float, ...]
    n_samples: int
    seed: int
    label_noise_std: float = NOISE_STD
    feature_noise_std: float = NOISE_STD
    # one noise scalar per sample (shared across components) by default;
    # True draws an independent scalar per component instead
    feature_noise_per_component: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if len(self.alpha) != self.m or len(self.beta) != self.m:
            raise ValueError("alpha/beta must have length m")
        if len(self.delta) != self.d or len(self.gamma) != self.d:
            raise ValueError("delta/gamma must have length d")
        if self.label_noise_std < 0 or self.feature_noise_std < 0:
            raise ValueError("noise std must be non-negative")

    def to_json_dict(self) -> dict:
        return {
            "d": self.d, "m": self.m,
            "c1": self.c1, "c2": self.c2, "cs": self.cs,
            "alpha": list(self.alpha), "beta": list(self.beta),
            "delta": list(self.delta), "gamma": list(self.gamma),
            "n_samples": self.n_samples, "seed": self.seed,
            "label_noise_std": self.label_noise_std,
            "feature_noise_std": self.feature_noise_std,
            "feature_noise_per_component": self.feature_noise_per_component,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SynthConfig":
        return cls(
            d=int(d["d"]), m=int(d["m"]),
            c1=float(d["c1"]), c2=float(d["c2"]), cs=float(d["cs"]),
            alpha=tuple(d["alpha"]), beta=tuple(d["beta"]),
            delta=tuple(d["delta"]), gamma=tuple(d["gamma"]),
            n_samples=int(d["n_samples"]), seed=int(d["seed"]),
            label_noise_std=float(d.get("label_noise_std", NOISE_STD)),
            feature_noise_std=float(d.get("feature_noise_std", NOISE_STD)),
            feature_noise_per_component=bool(d.get("feature_noise_per_component", False)),
        )


@dataclass(frozen=True)
class SynthBasis:
    u1: np.ndarray
    u2: np.ndarray
    us: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    ws: np.ndarray

    def to_json_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("u1", "u2", "us", "w1", "w2", "ws")}


def default_config(n_samples: int, seed: int, d: int = 16, m: int = 4,
                   c1: float = 1.0, c2: float = 1.0, cs: float = 1.0) -> SynthConfig:
    """Config with sinusoid constants drawn once from the seed: amplitudes
    alpha, delta from U[0.5, 1.5], phases beta, gamma from U[0, 2*pi]."""
    rng = Rng(derive_seed(seed, _TAG_PARAMS))
    return SynthConfig(
        d=d, m=m, c1=c1, c2=c2, cs=cs,
        alpha=tuple(rng.uniform_range(m, 0.5, 1.5)),
        beta=tuple(rng.uniform_range(m, 0.0, 2.0 * math.pi)),
        delta=tuple(rng.uniform_range(d, 0.5, 1.5)),
        gamma=tuple(rng.uniform_range(d, 0.0, 2.0 * math.pi)),
        n_samples=n_samples, seed=seed,
    )


def random_unit_vector(rng: Rng, d: int) -> np.ndarray:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    while True:
        v = rng.normals(d)
        norm = float(np.linalg.norm(v))
        if norm > 1e-12:
            return v / norm


def make_basis(config: SynthConfig) -> SynthBasis:
    rng = Rng(derive_seed(config.seed, _TAG_BASIS))
    u1 = random_unit_vector(rng, config.d)
    u2 = random_unit_vector(rng, config.d)
    us = random_unit_vector(rng, config.d)
    return SynthBasis(u1=u1, u2=u2, us=us,
                      w1=config.c1 * u1, w2=config.c2 * u2, ws=config.cs * us)


def _sin_sum(t: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """sum_i sin(alpha_i * t + beta_i) for each entry of t; zero when m = 0."""
    if alpha.size == 0:
        return np.zeros_like(t)
    return np.sin(np.multiply.outer(t, alpha) + beta).sum(axis=-1)


def label_pair(basis: SynthBasis, config: SynthConfig, x1: np.ndarray,
               x2: np.ndarray, xs: np.ndarray, eps1: float, eps2: float) -> tuple[float, float]:
    """Both labels for one sample with the noise passed in explicitly."""
    alpha = np.asarray(config.alpha)
    beta = np.asarray(config.beta)
    t1 = float(basis.w1 @ x1)
    t2 = float(basis.w2 @ x2)
    ts = float(basis.ws @ xs)
    s = ts + float(_sin_sum(np.array(ts), alpha, beta))
    y1 = s + t1 + float(_sin_sum(np.array(t1), alpha, beta)) + eps1
    y2 = s + t2 + float(_sin_sum(np.array(t2), alpha, beta)) + eps2
    return y1, y2


def make_labels(basis: SynthBasis, x1: np.ndarray, x2: np.ndarray, xs: np.ndarray,
                config: SynthConfig, rng: Rng) -> tuple[float, float]:
    eps1, eps2 = rng.normals(2, 0.0, config.label_noise_std)
    return label_pair(basis, config, x1, x2, xs, float(eps1), float(eps2))


def _mixture(basis: SynthBasis, kind: str, x1, x2, xs):
    if kind == "A":
        return basis.u1 * x1 + basis.us * xs
    if kind == "B":
        return basis.u2 * x2 + basis.us * xs
    if kind == "I":
        return basis.u1 * x1 + basis.u2 * x2 + basis.us * xs
    raise ValueError(f"unknown dataset kind {kind!r}, expected one of {KINDS}")


def feature_vector(basis: SynthBasis, config: SynthConfig, kind: str,
                   x1: np.ndarray, x2: np.ndarray, xs: np.ndarray,
                   eps: float | np.ndarray) -> np.ndarray:
    """One sample's feature row with the noise passed in explicitly."""
    z = _mixture(basis, kind, x1, x2, xs)
    phase = np.asarray(config.delta) * z + np.asarray(config.gamma)
    return np.sin(phase) + np.cos(phase) + eps


def make_features(basis: SynthBasis, x1: np.ndarray, x2: np.ndarray, xs: np.ndarray,
                  config: SynthConfig, rng: Rng, kind: str) -> np.ndarray:
    _mixture(basis, kind, x1, x2, xs)  # validate kind before consuming the stream
    count = config.d if config.feature_noise_per_component else 1
    eps = rng.normals(count, 0.0, config.feature_noise_std)
    return feature_vector(basis, config, kind, x1, x2, xs,
                          eps if count > 1 else float(eps[0]))


@dataclass(frozen=True)
class _LatentBlock:
    x1: np.ndarray
    x2: np.ndarray
    xs: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    feat_eps: dict  # kind -> [n, 1] or [n, d]


def _draw_latents(config: SynthConfig) -> _LatentBlock:
    """All randomness for one generation, in a fixed documented order, so
    every view of the same seed sees identical latents."""
    rng = Rng(derive_seed(config.seed, _TAG_SAMPLES))
    n, d = config.n_samples, config.d
    x1 = rng.normals(n * d, -1.0, X1_STD).reshape(n, d)
    x2 = rng.normals(n * d, 1.0, X2_STD).reshape(n, d)
    xs = rng.normals(n * d, 0.0, XS_STD).reshape(n, d)
    eps1 = rng.normals(n, 0.0, config.label_noise_std)
    eps2 = rng.normals(n, 0.0, config.label_noise_std)
    width = d if config.feature_noise_per_component else 1
    feat_eps = {kind: rng.normals(n * width, 0.0, config.feature_noise_std).reshape(n, width)
                for kind in KINDS}
    return _LatentBlock(x1=x1, x2=x2, xs=xs, eps1=eps1, eps2=eps2, feat_eps=feat_eps)


def generate(config: SynthConfig, kind: str) -> Dataset:
    """Dataset view for one kind: A carries y1, B carries y2, I carries both."""
    if kind not in KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}, expected one of {KINDS}")
    basis = make_basis(config)
    lat = _draw_latents(config)
    alpha = np.asarray(config.alpha)
    beta = np.asarray(config.beta)

    t1 = lat.x1 @ basis.w1
    t2 = lat.x2 @ basis.w2
    ts = lat.xs @ basis.ws
    s = ts + _sin_sum(ts, alpha, beta)
    y1 = s + t1 + _sin_sum(t1, alpha, beta) + lat.eps1
    y2 = s + t2 + _sin_sum(t2, alpha, beta) + lat.eps2

    if kind == "A":
        z = lat.x1 * basis.u1 + lat.xs * basis.us
        labels, names = (y1,), ("taskA",)
    elif kind == "B":
        z = lat.x2 * basis.u2 + lat.xs * basis.us
        labels, names = (y2,), ("taskB",)
    else:
        z = lat.x1 * basis.u1 + lat.x2 * basis.u2 + lat.xs * basis.us
        labels, names = (y1, y2), ("taskA", "taskB")

    phase = np.asarray(config.delta) * z + np.asarray(config.gamma)
    features = np.sin(phase) + np.cos(phase) + lat.feat_eps[kind]

    return Dataset(
        dense=features,
        categorical=np.zeros((config.n_samples, 0), dtype=np.int64),
        labels=labels,
        task_kinds=("regression",) * len(labels),
        name=kind,
    )


def label_columns(kind: str) -> tuple[str, ...]:
    if kind == "A":
        return ("y_taskA",)
    if kind == "B":
        return ("y_taskB",)
    if kind == "I":
        return ("y_taskA", "y_taskB")
    raise ValueError(f"unknown dataset kind {kind!r}, expected one of {KINDS}")


def schema_for(config: SynthConfig, kind: str) -> Schema:
    return Schema(
        tasks=tuple((name, "regression") for name in label_columns(kind)),
        dense_fields=tuple(f"f{i}" for i in range(config.d)),
        embedding_dim=1,
    )


def meta_path_for(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    stem = p.name[:-4] if p.name.endswith(".csv") else p.name
    return p.with_name(stem + ".meta.json")


def write_csv(dataset: Dataset, config: SynthConfig, kind: str,
              path: str | Path) -> tuple[Path, Path]:
    """Write the dataset plus a JSON sidecar holding config and basis.

    Floats are serialized with repr, which round-trips exactly; loading the
    CSV back reproduces the arrays bit for bit.
    """
    path = Path(path)
    header = [f"f{i}" for i in range(config.d)] + list(label_columns(kind))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.dense[i]]
            row += [repr(float(col[i])) for col in dataset.labels]
            fh.write(",".join(row) + "\n")
    meta = {
        "kind": kind,
        "columns": header,
        "config": config.to_json_dict(),
        "basis": make_basis(config).to_json_dict(),
        "schema": schema_for(config, kind).to_json_dict(),
    }
    mpath = meta_path_for(path)
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path, mpath


def read_meta(csv_path: str | Path) -> dict:
    with open(meta_path_for(csv_path), encoding="utf-8") as fh:
        return json.load(fh)
