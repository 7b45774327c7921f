import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdn.dataio import (Batch, DataError, Dataset, Schema, batches, load_csv,
                        sample_without_replacement)


def make_dataset(n=10, n_dense=3, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(
        dense=rng.normal(size=(n, n_dense)),
        categorical=np.zeros((n, 0), dtype=np.int64),
        labels=(rng.normal(size=n), (rng.normal(size=n) > 0).astype(float)),
        task_kinds=("regression", "binary"),
    )


CSV_SCHEMA = Schema(
    tasks=(("click", "binary"), ("spend", "regression")),
    categorical_fields=(("city", 4),),
    dense_fields=("age",),
)


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_schema_validation():
    with pytest.raises(DataError):
        Schema(tasks=())
    with pytest.raises(DataError):
        Schema(tasks=(("y", "regression"),))  # no fields
    with pytest.raises(DataError):
        Schema(tasks=(("y", "ordinal"),), dense_fields=("x",))
    with pytest.raises(DataError):
        Schema(tasks=(("y", "binary"),), categorical_fields=(("c", 0),))


def test_dataset_rejects_non_binary_labels():
    with pytest.raises(DataError):
        Dataset(
            dense=np.zeros((2, 1)),
            categorical=np.zeros((2, 0), dtype=np.int64),
            labels=(np.array([0.0, 0.5]),),
            task_kinds=("binary",),
        )


def test_load_csv_well_formed(tmp_path):
    p = write(tmp_path, "age,city,click,spend\n1.5,2,1,10.0\n2.5,3,0,0.0\n3.5,1,1,5.0\n")
    ds, skipped = load_csv(p, CSV_SCHEMA)
    assert skipped == 0
    assert ds.n == 3
    assert ds.dense[:, 0].tolist() == [1.5, 2.5, 3.5]
    assert ds.categorical[:, 0].tolist() == [2, 3, 1]
    assert ds.labels[0].tolist() == [1.0, 0.0, 1.0]
    assert ds.labels[1].tolist() == [10.0, 0.0, 5.0]


def test_load_csv_skips_malformed_rows(tmp_path):
    p = write(tmp_path, "age,city,click,spend\n"
                        "1.0,1,1,2.0\n"
                        "oops,1,1,2.0\n"      # non-numeric dense
                        "1.0,1,0.5,2.0\n"     # non-binary click label
                        "1.0,1,1\n"           # short row
                        "1.0,1,1,inf\n"       # non-finite regression label
                        "2.0,2,0,3.0\n")
    ds, skipped = load_csv(p, CSV_SCHEMA)
    assert ds.n == 2
    assert skipped == 4


def test_load_csv_out_of_vocabulary_maps_to_zero(tmp_path):
    p = write(tmp_path, "age,city,click,spend\n1.0,9,1,2.0\n1.0,-3,0,1.0\n1.0,3,1,0.0\n")
    ds, _ = load_csv(p, CSV_SCHEMA)
    assert ds.categorical[:, 0].tolist() == [0, 0, 3]


def test_load_csv_header_mismatch(tmp_path):
    p = write(tmp_path, "age,town,click,spend\n1.0,1,1,2.0\n")
    with pytest.raises(DataError, match="city"):
        load_csv(p, CSV_SCHEMA)


def test_load_csv_ignores_extra_columns(tmp_path):
    p = write(tmp_path, "extra,age,city,click,spend\nzzz,1.0,1,1,2.0\n")
    ds, skipped = load_csv(p, CSV_SCHEMA)
    assert ds.n == 1 and skipped == 0


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "absent.csv", CSV_SCHEMA)


def test_load_csv_all_rows_malformed(tmp_path):
    p = write(tmp_path, "age,city,click,spend\nx,1,1,2.0\n")
    with pytest.raises(DataError, match="no usable rows"):
        load_csv(p, CSV_SCHEMA)


def test_schema_json_round_trip():
    again = Schema.from_json_dict(CSV_SCHEMA.to_json_dict())
    assert again == CSV_SCHEMA


def test_sample_without_replacement_full_size_is_permutation():
    ds = make_dataset(8)
    out = sample_without_replacement(ds, 8, seed=3)
    assert sorted(out.dense[:, 0].tolist()) == sorted(ds.dense[:, 0].tolist())


def test_sample_without_replacement_distinct_rows():
    ds = make_dataset(20)
    out = sample_without_replacement(ds, 10, seed=5)
    assert len({round(v, 12) for v in out.dense[:, 0]}) == 10


def test_sample_without_replacement_rejects_bad_sizes():
    ds = make_dataset(4)
    with pytest.raises(DataError):
        sample_without_replacement(ds, 0, seed=1)
    with pytest.raises(DataError):
        sample_without_replacement(ds, 5, seed=1)


def test_sample_without_replacement_deterministic():
    ds = make_dataset(30)
    a = sample_without_replacement(ds, 7, seed=11)
    b = sample_without_replacement(ds, 7, seed=11)
    assert np.array_equal(a.dense, b.dense)


def test_sample_frequency_is_uniform():
    ds = make_dataset(4)
    counts = np.zeros(4, dtype=int)
    for seed in range(1000):
        picked = sample_without_replacement(ds, 1, seed=seed)
        row = int(np.argmin(np.abs(ds.dense[:, 0] - picked.dense[0, 0])))
        counts[row] += 1
    assert counts.sum() == 1000
    assert all(abs(c - 250) <= 50 for c in counts)


def test_batches_sizes_and_short_tail():
    ds = make_dataset(10)
    sizes = [b.size for b in batches(ds, 4, shuffle_seed=1)]
    assert sizes == [4, 4, 2]


def test_batches_deterministic_per_seed():
    ds = make_dataset(20)
    a = [b.dense for b in batches(ds, 6, shuffle_seed=9)]
    b_ = [b.dense for b in batches(ds, 6, shuffle_seed=9)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b_))


def test_batches_partition_dataset_exactly():
    ds = make_dataset(23)
    seen = np.concatenate([b.dense[:, 0] for b in batches(ds, 5, shuffle_seed=2)])
    assert sorted(seen.tolist()) == sorted(ds.dense[:, 0].tolist())
    labels = np.concatenate([b.labels[0] for b in batches(ds, 5, shuffle_seed=2)])
    assert sorted(labels.tolist()) == sorted(ds.labels[0].tolist())


def test_batches_unshuffled_preserves_order():
    ds = make_dataset(9)
    seen = np.concatenate([b.dense for b in batches(ds, 4, shuffle_seed=None)])
    assert np.array_equal(seen, ds.dense)


def test_batches_rejects_zero_batch():
    with pytest.raises(DataError):
        list(batches(make_dataset(4), 0, shuffle_seed=1))


@given(st.integers(1, 40), st.integers(1, 13), st.integers(0, 2**31))
@settings(max_examples=40)
def test_batches_partition_property(n, batch_size, seed):
    ds = make_dataset(n)
    chunks = list(batches(ds, batch_size, shuffle_seed=seed))
    assert sum(b.size for b in chunks) == n
    seen = np.concatenate([b.dense[:, 0] for b in chunks])
    assert sorted(seen.tolist()) == sorted(ds.dense[:, 0].tolist())


def test_split_head_tail():
    ds = make_dataset(10)
    head, tail = ds.split(7)
    assert head.n == 7 and tail.n == 3
    assert np.array_equal(np.vstack([head.dense, tail.dense]), ds.dense)
    with pytest.raises(DataError):
        ds.split(10)
