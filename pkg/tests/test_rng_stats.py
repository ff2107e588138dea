import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deloclab.rng import generator
from deloclab.stats import Moments, pairwise_moments, summarize, wilson_interval


def test_generator_keyed():
    a = generator(1, 5, "matrix").standard_normal(4)
    assert np.array_equal(a, generator(1, 5, "matrix").standard_normal(4))
    assert not np.array_equal(a, generator(1, 5, "dbm").standard_normal(4))
    assert not np.array_equal(a, generator(1, 6, "matrix").standard_normal(4))
    assert not np.array_equal(a, generator(2, 5, "matrix").standard_normal(4))


def test_generator_order_independent():
    first = [generator(0, s).random() for s in range(5)]
    second = [generator(0, s).random() for s in reversed(range(5))][::-1]
    assert first == second


def test_generator_rejects_negative():
    with pytest.raises(ValueError):
        generator(-1)


def test_wilson_closed_form():
    k, n, z = 7, 40, 1.959963984540054
    p = k / n
    c = (p + z * z / (2 * n)) / (1 + z * z / n)
    h = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    lo, hi = wilson_interval(k, n)
    assert lo == pytest.approx(c - h, abs=1e-9)
    assert hi == pytest.approx(c + h, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60))
def test_pairwise_matches_numpy(xs):
    m = pairwise_moments(list(range(len(xs))), xs)
    assert m.n == len(xs)
    assert m.mean == pytest.approx(np.mean(xs), abs=1e-9)
    if len(xs) > 1:
        assert m.var == pytest.approx(np.var(xs, ddof=1), rel=1e-8, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.permutations(list(range(17))))
def test_pairwise_order_invariant(perm):
    vals = [0.1 * k**1.5 for k in range(17)]
    ref = pairwise_moments(list(range(17)), vals)
    got = pairwise_moments([perm[i] for i in range(17)], [vals[perm[i]] for i in range(17)])
    assert (got.mean, got.m2) == (ref.mean, ref.m2)


def test_moments_merge_empty():
    e = Moments(0, 0.0, 0.0)
    x = Moments.of(3.0)
    assert e.merge(x) == x and x.merge(e) == x


def test_summarize():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s["n"] == 4 and s["mean"] == 2.5
    assert summarize([])["n"] == 0
