import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ycda.tensor import (
    InvalidShapeError,
    ShapeMismatchError,
    elementwise,
    reduce_spatial,
    sigmoid,
    zeros,
)


def test_zeros_shapes():
    np.testing.assert_array_equal(zeros([2, 2]), [[0, 0], [0, 0]])
    np.testing.assert_array_equal(zeros([1]), [0])
    z = zeros([3, 2, 2])
    assert z.size == 12 and not z.any()
    assert z.dtype == np.float64


@pytest.mark.parametrize("shape", [[0], [2, 0], [3, 0, 1], []])
def test_zeros_rejects_empty_extents(shape):
    with pytest.raises(InvalidShapeError):
        zeros(shape)


def test_elementwise_examples():
    np.testing.assert_array_equal(elementwise([1, 2], [3, 4], "mul"), [3, 8])
    a = np.array([[[1.0, 2.0]], [[3.0, 4.0]]])
    np.testing.assert_array_equal(elementwise(a, [10, 0.5], "mul"), [[[10, 20]], [[1.5, 2]]])
    x = np.random.default_rng(0).random((3, 4, 5))
    np.testing.assert_array_equal(elementwise(x, zeros(x.shape), "add"), x)


def test_elementwise_does_not_mutate():
    a = np.ones((2, 3, 3))
    b = np.array([2.0, 3.0])
    elementwise(a, b, "mul")
    assert (a == 1).all() and (b == [2, 3]).all()


@pytest.mark.parametrize(
    "a_shape,b_shape", [((2, 3), (3, 2)), ((2, 3, 3), (3,)), ((2, 3, 3), (2, 3)), ((4,), (2,))]
)
def test_elementwise_shape_mismatch(a_shape, b_shape):
    with pytest.raises(ShapeMismatchError):
        elementwise(np.ones(a_shape), np.ones(b_shape))


def test_channel_broadcast_matches_materialised_expansion_exhaustively():
    rng = np.random.default_rng(1)
    for c, h, w in itertools.product(range(1, 9), repeat=3):
        a = rng.standard_normal((c, h, w))
        b = rng.standard_normal(c)
        expanded = np.empty_like(a)
        for ch in range(c):
            expanded[ch] = b[ch]
        np.testing.assert_array_equal(elementwise(a, b, "mul"), a * expanded)
        np.testing.assert_array_equal(elementwise(a, b, "add"), a + expanded)


def test_reduce_spatial_examples():
    const = np.full((2, 3, 3), 0.7)
    np.testing.assert_allclose(reduce_spatial(const, "mean"), [0.7, 0.7], rtol=0, atol=1e-15)
    assert (reduce_spatial(const, "var") == 0).all()
    ch = np.array([[[0.0, 0.0], [1.0, 1.0]]])
    assert reduce_spatial(ch, "mean")[0] == 0.5
    assert reduce_spatial(ch, "var")[0] == 0.25


def test_reduce_spatial_requires_3d():
    with pytest.raises(ShapeMismatchError):
        reduce_spatial(np.ones((3, 3)), "mean")
    with pytest.raises(ValueError):
        reduce_spatial(np.ones((1, 3, 3)), "median")


def test_variance_is_two_pass_not_cancelling():
    # E[x^2] - E[x]^2 returns garbage here; the two-pass form is exact
    x = 1e8 + np.array([[[0.0, 1.0], [2.0, 3.0]]])
    assert reduce_spatial(x, "var")[0] == pytest.approx(1.25, rel=1e-12)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
maps = st.tuples(st.integers(1, 4), st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=finite)
)


@settings(max_examples=100, deadline=None)
@given(maps, st.randoms(use_true_random=False))
def test_stats_permutation_invariant_and_var_nonnegative(f, rnd):
    c, h, w = f.shape
    perm = list(range(h * w))
    rnd.shuffle(perm)
    g = f.reshape(c, -1)[:, perm].reshape(c, h, w)
    var = reduce_spatial(f, "var")
    assert (var >= 0).all()
    np.testing.assert_allclose(reduce_spatial(g, "mean"), reduce_spatial(f, "mean"), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(reduce_spatial(g, "var"), var, rtol=1e-9, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(maps, st.floats(-100, 100, allow_nan=False))
def test_variance_scales_quadratically(f, a):
    lhs = reduce_spatial(a * f, "var")
    rhs = a * a * reduce_spatial(f, "var")
    scale = (abs(a) * np.abs(f).max()) ** 2
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-12 * scale + 1e-300)


def test_sigmoid_saturates_without_overflow():
    with np.errstate(over="raise"):
        s = sigmoid(np.array([-800.0, 0.0, 800.0]))
    np.testing.assert_array_equal(s, [0.0, 0.5, 1.0])
