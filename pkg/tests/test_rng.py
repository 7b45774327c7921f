import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdn.rng import MASK64, Rng, derive_seed, mix64, sample_gaussian

# First outputs of the documented generator, cross-checked against an
# independently written scalar loop and published reference streams.
KNOWN_SEED0 = [16294208416658607535, 7960286522194355700, 487617019471545679]
KNOWN_SEED1234567 = [
    6457827717110365317,
    3203168211198807973,
    9817491932198370423,
    4593380528125082431,
    16408922859458223821,
]


def test_raw_stream_matches_reference_vectors():
    r = Rng(0)
    assert [r.next_uint64() for _ in range(3)] == KNOWN_SEED0
    r = Rng(1234567)
    assert [r.next_uint64() for _ in range(5)] == KNOWN_SEED1234567


def test_block_generation_equals_scalar_calls():
    block = Rng(42).uniforms(257)
    scalar_rng = Rng(42)
    scalar = np.array(
        [(scalar_rng.next_uint64() >> 11) * 2.0**-53 for _ in range(257)]
    )
    assert np.array_equal(block, scalar)


def test_same_seed_same_stream():
    a, b = Rng(7), Rng(7)
    assert np.array_equal(a.uniforms(100), b.uniforms(100))
    assert np.array_equal(a.normals(101), b.normals(101))


def test_different_seeds_differ():
    assert not np.array_equal(Rng(1).uniforms(16), Rng(2).uniforms(16))


def test_uniforms_in_unit_interval():
    u = Rng(3).uniforms(10_000)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_uniform_range_bounds():
    u = Rng(9).uniform_range(1000, -2.0, 5.0)
    assert u.min() >= -2.0 and u.max() < 5.0


def test_normals_law_of_large_numbers():
    z = Rng(2024).normals(100_000)
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02


def test_normals_degenerate_std_zero():
    z = Rng(5).normals(50, mean=7.0, std=0.0)
    assert np.array_equal(z, np.full(50, 7.0))


def test_normals_rejects_negative_std():
    with pytest.raises(ValueError):
        Rng(5).normals(10, std=-1.0)


def test_normals_odd_count_consumes_full_pair():
    # n and n+1 draws start from the same uniform block boundary rule,
    # so a fresh generator is deterministic regardless of parity.
    a = Rng(11).normals(7)
    b = Rng(11).normals(8)
    assert np.array_equal(a, b[:7])


def test_sample_gaussian_same_seed_bit_identical():
    m1 = sample_gaussian(Rng(99), 4, 5, 0.0, 1.0)
    m2 = sample_gaussian(Rng(99), 4, 5, 0.0, 1.0)
    assert np.array_equal(m1.data, m2.data)
    assert m1.shape == (4, 5)


def test_gaussian_matrix_mean_scale():
    m = Rng(1).gaussian_matrix(100, 100, 3.0, 0.5)
    assert abs(m.data.mean() - 3.0) < 0.02
    assert abs(m.data.std() - 0.5) < 0.02


def test_randint_below_range_and_determinism():
    r = Rng(17)
    draws = [r.randint_below(10) for _ in range(1000)]
    assert all(0 <= d < 10 for d in draws)
    r2 = Rng(17)
    assert draws == [r2.randint_below(10) for _ in range(1000)]
    counts = np.bincount(draws, minlength=10)
    assert counts.min() > 50  # crude uniformity guard


def test_randint_below_one_is_always_zero():
    r = Rng(3)
    assert all(r.randint_below(1) == 0 for _ in range(5))


def test_randint_below_rejects_nonpositive():
    with pytest.raises(ValueError):
        Rng(3).randint_below(0)


def test_permutation_is_permutation():
    p = Rng(23).permutation(40)
    assert sorted(p.tolist()) == list(range(40))
    assert np.array_equal(p, Rng(23).permutation(40))


def test_spawn_depends_on_seed_not_position():
    parent = Rng(55)
    parent.uniforms(10)  # advance the state
    child_after = parent.spawn(1)
    child_fresh = Rng(55).spawn(1)
    assert np.array_equal(child_after.uniforms(8), child_fresh.uniforms(8))


def test_spawn_salts_give_distinct_streams():
    parent = Rng(55)
    assert not np.array_equal(parent.spawn(1).uniforms(8), parent.spawn(2).uniforms(8))


def test_derive_seed_order_sensitive():
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)


@given(st.integers(0, MASK64))
@settings(max_examples=200)
def test_mix64_stays_in_64_bits(z):
    out = mix64(z)
    assert 0 <= out <= MASK64


@given(st.integers(0, MASK64), st.integers(1, 64))
@settings(max_examples=50)
def test_stream_reproducible_for_any_seed(seed, n):
    assert np.array_equal(Rng(seed).uniforms(n), Rng(seed).uniforms(n))
