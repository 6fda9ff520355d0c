"""Seed-derivation determinism and scalar/vector agreement."""

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from tapaudit.seeding import mix64, mix64_vec, uniform01_vec

u64 = st.integers(min_value=0, max_value=(1 << 64) - 1)


@given(u64, u64)
def test_deterministic(a, b):
    assert mix64(a, b) == mix64(a, b)


@given(u64, u64)
def test_order_sensitive(a, b):
    if a != b:
        assert mix64(a, b) != mix64(b, a)


@given(st.lists(u64, min_size=1, max_size=4))
def test_vector_matches_scalar(parts):
    scalar = mix64(*parts)
    vec = mix64_vec(*[np.asarray([p], dtype=np.uint64) for p in parts])
    assert int(vec[0]) == scalar


def test_vector_broadcasts():
    out = mix64_vec(7, np.arange(5, dtype=np.int64), 3)
    assert out.shape == (5,)
    assert len(set(out.tolist())) == 5


def test_negative_inputs_fold_by_bit_pattern():
    assert mix64(-1) == mix64((1 << 64) - 1)


def test_uniform01_range():
    bits = mix64_vec(12345, np.arange(10000, dtype=np.int64))
    u = uniform01_vec(bits)
    assert np.all(u >= 0.0) and np.all(u < 1.0)
    assert abs(u.mean() - 0.5) < 0.02
