import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from somxfer.core import (NORM_FLOOR, EmptyKnowledgeBase, argmax_similarity, as_weight_vector,
                          cosine_similarity, cosine_to_many, is_degenerate)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vectors(n=st.integers(1, 12)):
    return n.flatmap(lambda k: arrays(np.float64, k, elements=finite))


def pairs():
    return st.integers(1, 12).flatmap(
        lambda k: st.tuples(arrays(np.float64, k, elements=finite), arrays(np.float64, k, elements=finite)))


@pytest.mark.parametrize("a,b,expected", [
    ([1, 0], [1, 0], 1.0),
    ([1, 0], [0, 1], 0.0),
    ([2, 0], [5, 0], 1.0),
    ([1, 1], [1, 0], 1 / math.sqrt(2)),
])
def test_cosine_examples(a, b, expected):
    assert cosine_similarity(a, b) == pytest.approx(expected, abs=1e-9)


def test_cosine_matches_hand_formula(rng):
    for _ in range(50):
        a, b = rng.normal(size=7), rng.normal(size=7)
        dot = sum(x * y for x, y in zip(a, b))
        na = math.sqrt(sum(x * x for x in a))
        nb = math.sqrt(sum(y * y for y in b))
        assert cosine_similarity(a, b) == pytest.approx(dot / (na * nb), abs=1e-12)


def test_degenerate_vectors_give_zero():
    assert cosine_similarity([0.0, 0.0], [1.0, 2.0]) == 0.0
    assert cosine_similarity([1e-13, 0.0], [1.0, 0.0]) == 0.0
    assert is_degenerate(np.zeros(3))
    assert not is_degenerate(np.array([NORM_FLOOR * 2, 0.0]))


def test_floor_is_configurable():
    assert cosine_similarity([1e-6, 0], [1, 0], floor=1e-3) == 0.0
    assert cosine_similarity([1e-6, 0], [1, 0]) == pytest.approx(1.0)


def test_length_mismatch_raises():
    with pytest.raises(ValueError, match="length mismatch"):
        cosine_similarity([1, 2], [1, 2, 3])


@given(vectors())
def test_self_similarity_is_one(a):
    assume(np.linalg.norm(a) > 1e-6)
    assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-9)


@given(pairs())
def test_symmetry_and_bounds(ab):
    a, b = ab
    c = cosine_similarity(a, b)
    assert c == pytest.approx(cosine_similarity(b, a), abs=1e-12)
    assert -1.0 <= c <= 1.0


@given(pairs(), st.floats(1e-3, 1e3))
def test_positive_scale_invariance(ab, k):
    a, b = ab
    assume(np.linalg.norm(a) > 1e-3 and np.linalg.norm(b) > 1e-3)
    assert cosine_similarity(k * a, b) == pytest.approx(cosine_similarity(a, b), abs=1e-9)


def test_cosine_to_many_matches_scalar(rng):
    m = rng.normal(size=(9, 5))
    m[3] = 0.0
    q = rng.normal(size=5)
    got = cosine_to_many(q, m)
    want = [cosine_similarity(q, row) for row in m]
    np.testing.assert_allclose(got, want, atol=1e-12)
    assert got[3] == 0.0


def test_argmax_examples():
    assert argmax_similarity([1, 0], [[0, 1], [0.9, 0.1]]) == 1
    assert argmax_similarity([1, 0], [[1, 0], [1, 0]]) == 0


def test_argmax_empty_raises():
    with pytest.raises(EmptyKnowledgeBase, match="no knowledge base"):
        argmax_similarity([1, 0], [])


def _scan(q, cands):
    best, best_i = -math.inf, -1
    for i, c in enumerate(cands):
        s = cosine_similarity(q, c)
        if s > best:
            best, best_i = s, i
    return best_i


def test_argmax_matches_exhaustive_scan(rng):
    for _ in range(100):
        cands = rng.normal(size=(16, 8))
        q = rng.normal(size=8)
        assert argmax_similarity(q, cands) == _scan(q, cands)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_argmax_invariant_under_candidate_rescaling(seed, k):
    r = np.random.default_rng(seed)
    cands = r.normal(size=(10, 6))
    q = r.normal(size=6)
    j = r.integers(10)
    scaled = cands.copy()
    scaled[j] *= k
    assert argmax_similarity(q, scaled) == argmax_similarity(q, cands)


def test_as_weight_vector_validation():
    np.testing.assert_array_equal(as_weight_vector([1, 2]), [1.0, 2.0])
    with pytest.raises(ValueError, match="length > 0"):
        as_weight_vector([])
    with pytest.raises(ValueError, match="non-finite"):
        as_weight_vector([1.0, np.nan])
    with pytest.raises(ValueError, match="1-D"):
        as_weight_vector([[1.0]])
