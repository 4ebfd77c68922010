import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from feataug.tensor import (DimensionError, InsufficientDataError, RandomStream,
                            euclidean_distance, gaussian_sample, per_element_std)


def two_pass_std(rows):
    """Column-wise population std, coded with explicit loops."""
    n = len(rows)
    out = []
    for j in range(len(rows[0])):
        mean = sum(r[j] for r in rows) / n
        out.append(math.sqrt(sum((r[j] - mean) ** 2 for r in rows) / n))
    return out


def test_std_identical_rows_is_zero():
    assert np.all(per_element_std([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]) == 0.0)


def test_std_population_convention():
    assert per_element_std([[0.0], [2.0]]).tolist() == [1.0]


def test_std_matches_two_pass_oracle():
    X = np.random.default_rng(3).normal(size=(100, 8)) * 5 + 2
    np.testing.assert_allclose(per_element_std(X), two_pass_std(X.tolist()), rtol=0, atol=1e-12)


def test_std_needs_two_rows():
    with pytest.raises(InsufficientDataError):
        per_element_std([[1.0, 2.0]])


@given(arrays(np.float64, (6, 3), elements=st.floats(-1e3, 1e3)), st.randoms())
def test_std_permutation_invariant(X, rnd):
    perm = list(range(len(X)))
    rnd.shuffle(perm)
    np.testing.assert_allclose(per_element_std(X), per_element_std(X[perm]), atol=1e-9)


def test_gaussian_determinism():
    a = gaussian_sample(RandomStream(42), 1000)
    b = gaussian_sample(RandomStream(42), 1000)
    assert np.array_equal(a, b)


def test_child_streams_are_independent_of_parent_use():
    s = RandomStream(5)
    first = gaussian_sample(s.child("noise"), 10)
    gaussian_sample(s, 100)
    assert np.array_equal(first, gaussian_sample(s.child("noise"), 10))
    assert not np.array_equal(first, gaussian_sample(s.child("init"), 10))


def test_gaussian_moments():
    x = gaussian_sample(RandomStream(7), 1_000_000)
    assert abs(x.mean()) < 0.01
    assert abs(x.var() - 1.0) < 0.01


def test_distance_examples():
    assert euclidean_distance([0, 0], [3, 4]) == 5.0
    v = [1.5, -2.0, 7.25]
    assert euclidean_distance(v, v) == 0.0


def test_distance_matches_naive_loop():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b = rng.normal(size=(2, 16))
        naive = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
        assert abs(euclidean_distance(a, b) - naive) < 1e-12


def test_distance_length_mismatch():
    with pytest.raises(DimensionError):
        euclidean_distance([1, 2], [1, 2, 3])


vec = arrays(np.float64, 4, elements=st.floats(-1e3, 1e3))


@settings(max_examples=200)
@given(vec, vec, vec)
def test_triangle_inequality_and_symmetry(a, b, c):
    ab, bc, ac = euclidean_distance(a, b), euclidean_distance(b, c), euclidean_distance(a, c)
    assert ab == euclidean_distance(b, a)
    assert ac <= ab + bc + 1e-9
