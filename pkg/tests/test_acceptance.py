"""Acceptance gate: one test and one printed PASS/FAIL line per criterion.

Criteria 3-5 share a single full oracle-gap study (the expensive part);
everything else is self-contained and fast. Run with -s to see the lines,
or rely on the per-test outcome that pytest -v prints.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

import test_autodiff
import test_models
from reference import pairwise_auc_outer

from fdn import autodiff as ad
from fdn import (
    LossWeights,
    Matrix,
    ModelSpec,
    Rng,
    auc,
    batches,
    default_config,
    derive_seed,
    generate,
    init_params,
    load_checkpoint,
    param_count,
    run_benchmark,
    save_checkpoint,
    total_loss,
)
from fdn.benchmark import ABLATION_VARIANTS
from fdn.cli import entrypoint
from fdn.datagen import schema_for, write_csv
from fdn.dataio import load_csv
from fdn.losses import orth_loss

MTL = ("mmoe", "cgc", "ple", "fdn")


def _report(num: int, label: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {num} ({label}): {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line, flush=True)
    assert ok, line


# --- criterion 1: central finite differences agree with backward() ----------

OP_FD_CHECKS = [fn for name, fn in sorted(vars(test_autodiff).items())
                if name.startswith("test_fd_")]


def test_criterion_1_gradient_checks():
    start = time.perf_counter()
    for check in OP_FD_CHECKS:
        check()
    for kind in ("single", "mmoe", "cgc", "ple", "fdn"):
        test_models.test_model_total_loss_gradients(kind)
    elapsed = time.perf_counter() - start
    _report(1, "finite-difference gradients", elapsed < 60.0,
            f"{len(OP_FD_CHECKS)} op checks + 5 model losses, {elapsed:.1f}s")


# --- criterion 2: rank-based auc equals the quadratic pairwise count --------


def test_criterion_2_auc_matches_pairwise_oracle():
    start = time.perf_counter()
    rng = Rng(202)
    for _ in range(100):
        n = 2 + rng.randint_below(999)
        scores = np.round(rng.uniform_range(n, -2.0, 2.0), 1)
        labels = (rng.uniforms(n) < 0.5).astype(np.float64)
        labels[0], labels[1] = 0.0, 1.0
        assert auc(scores, labels) == pairwise_auc_outer(scores, labels)
    elapsed = time.perf_counter() - start
    _report(2, "auc equals pairwise oracle", elapsed < 60.0,
            f"100 instances up to n=1000, {elapsed:.1f}s")


# --- criteria 3-5: the full oracle-gap study, run once ----------------------


@pytest.fixture(scope="module")
def gap_study():
    start = time.perf_counter()
    result = run_benchmark()
    return result, time.perf_counter() - start


def test_criterion_3_oracle_gap_ordering(gap_study):
    result, elapsed = gap_study
    med = {k: result.median_abs_gap(k) for k in MTL}
    beats_pooled = (med["fdn"][0] < med["mmoe"][0]
                    and med["fdn"][1] < med["mmoe"][1])
    smallest_somewhere = any(
        med["fdn"][t] <= min(med[k][t] for k in ("mmoe", "cgc", "ple"))
        for t in (0, 1))
    in_budget = elapsed < 900.0
    detail = ", ".join(f"{k} {med[k][0]:.2f}/{med[k][1]:.2f}" for k in MTL)
    _report(3, "median |gap| ordering",
            beats_pooled and smallest_somewhere and in_budget,
            f"{detail}, {elapsed:.0f}s")


def test_criterion_4_ablations_do_not_beat_full(gap_study):
    result, _ = gap_study
    med = {v: result.median_ablation_mse(v) for v in ABLATION_VARIANTS}
    ok = all(med["full"][0] <= med[v][0] for v in ABLATION_VARIANTS[1:])
    detail = " ".join(f"{v}={med[v][0]:.4f}" for v in ABLATION_VARIANTS)
    _report(4, "full model leads its ablations on task A", ok, detail)


def test_criterion_5_orth_loss_halves_diagnostic(gap_study):
    result, _ = gap_study
    ratio = result.median_orth_ratio()
    _report(5, "orthogonality diagnostic ratio", ratio <= 0.5,
            f"median with/without = {ratio:.3f}")


# --- criterion 6: parameter budget under a matched configuration ------------


def test_criterion_6_param_count_ordering():
    common = dict(task_kinds=("binary", "binary"), n_dense=0,
                  categorical_vocabs=(1000,) * 8, embedding_dim=16,
                  expert_hidden=(128, 64), tower_hidden=32)
    counts = {
        "fdn": param_count(ModelSpec(kind="fdn", dcps_per_task=2, **common)),
        "mmoe": param_count(ModelSpec(kind="mmoe", num_experts=8, **common)),
        "cgc": param_count(ModelSpec(kind="cgc", num_experts=8, **common)),
        "ple": param_count(ModelSpec(kind="ple", num_experts=16, levels=2,
                                     **common)),
    }
    ok = counts["fdn"] < counts["mmoe"] < counts["cgc"] < counts["ple"]
    _report(6, "param count fdn < mmoe < cgc < ple", ok,
            " ".join(f"{k}={v}" for k, v in counts.items()))


# --- criterion 7: identical flags give byte-identical outputs ---------------


def test_criterion_7_benchmark_reruns_byte_identical(tmp_path):
    args = ["benchmark-synthetic", "--seeds", "2", "--trainrows", "300",
            "--testrows", "80", "--d", "4", "--m", "2", "--epochs", "1",
            "--batch", "64", "--expert-hidden", "16,8", "--tower-hidden", "8",
            "--quiet"]
    runs = []
    for sub in ("first", "second"):
        out = tmp_path / sub
        assert entrypoint(args + ["--out", str(out)]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    ok = runs[0] == runs[1] and len(runs[0]) == 6
    _report(7, "byte-identical benchmark reruns", ok,
            ", ".join(sorted(runs[0])))


# --- criterion 8: one spot check per module's documented invariants ---------


def test_criterion_8_module_invariants(tmp_path):
    assert np.array_equal(Rng(5).uniforms(64), Rng(5).uniforms(64))
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)

    sm = ad.softmax_rows(ad.constant(Rng(6).uniform_matrix(5, 7, -3.0, 3.0)))
    assert np.allclose(sm.value.data.sum(axis=1), 1.0)

    cfg = default_config(n_samples=50, seed=9, d=4, m=2)
    view_a, view_i = generate(cfg, "A"), generate(cfg, "I")
    assert np.array_equal(view_a.labels[0], view_i.labels[0])
    assert np.array_equal(generate(cfg, "I").dense, view_i.dense)

    seen = np.concatenate(
        [b.dense[:, 0] for b in batches(view_i, 16, shuffle_seed=3)])
    assert np.array_equal(np.sort(seen), np.sort(view_i.dense[:, 0]))

    spec = ModelSpec(kind="fdn", task_kinds=("regression", "binary"),
                     n_dense=4, expert_hidden=(6, 4), tower_hidden=3,
                     dcps_per_task=2)
    params = init_params(spec, seed=1)
    assert param_count(spec) == params.n_scalars()
    save_checkpoint(spec, params, tmp_path / "m.ckpt")
    spec2, params2 = load_checkpoint(tmp_path / "m.ckpt")
    assert spec2 == spec
    assert np.array_equal(params2.state_vector(), params.state_vector())

    parts = [ad.constant(Matrix.wrap(np.array([[v]]))) for v in (0.7, 0.3, 0.2)]
    combined = total_loss(parts[0], parts[1], parts[2],
                          LossWeights(1.0, 0.5, 0.25))
    want = 0.7 + 0.5 * 0.3 + 0.25 * 0.2
    assert abs(combined.value.data[0, 0] - want) < 1e-12

    scores = Rng(8).uniform_range(40, -1.0, 1.0)
    labels = (Rng(9).uniforms(40) < 0.5).astype(np.float64)
    labels[0], labels[1] = 0.0, 1.0
    assert auc(scores, labels) == auc(np.exp(scores), labels)
    assert auc(scores, labels) == auc(3.0 * scores + 10.0, labels)

    rng = Rng(12)
    fs = rng.uniform_matrix(5, 4, -1.0, 1.0).data
    fp = rng.uniform_matrix(5, 4, -1.0, 1.0).data
    base = orth_loss([[ad.constant(Matrix.wrap(fs))]],
                     [[ad.constant(Matrix.wrap(fp))]]).value.data[0, 0]
    q1, _ = np.linalg.qr(Rng(3).gaussian_matrix(4, 4, 0.0, 1.0).data)
    q2, _ = np.linalg.qr(Rng(4).gaussian_matrix(4, 4, 0.0, 1.0).data)
    rotated = orth_loss([[ad.constant(Matrix.wrap(fs @ q1))]],
                        [[ad.constant(Matrix.wrap(fp @ q2))]]).value.data[0, 0]
    assert abs(rotated - base) < 1e-9

    csv_path, _ = write_csv(view_i, cfg, "I", tmp_path / "roundtrip.csv")
    loaded, skipped = load_csv(csv_path, schema_for(cfg, "I"))
    assert skipped == 0
    assert np.array_equal(loaded.dense, view_i.dense)
    assert all(np.array_equal(a, b)
               for a, b in zip(loaded.labels, view_i.labels))

    _report(8, "module invariants",
            True, "rng/autodiff/datagen/dataio/models/losses/metrics")
