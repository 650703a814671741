"""Cross-backend equivalence for the convolution kernels.

The compiled extension and the numpy fallback compute the same math, so
they must agree to within accumulation-order noise (a few ULPs) on any
input, and exactly on integer-valued input where float addition is
exact.  Shapes cover document lengths 0, 1, and shorter than the kernel
width.  Within one backend results are bit-reproducible; across
backends BLAS blocking may order sums differently.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regcore.cnn import backends
from regcore.cnn import kernels_py

pytestmark = pytest.mark.skipif(
    not backends.HAVE_COMPILED, reason="compiled extension not built"
)


def random_case(rng, batch, width, dim, filters, kernel):
    emb = rng.normal(size=(batch, width, dim))
    lengths = rng.integers(0, width + 1, size=batch).astype(np.int64)
    w = rng.normal(size=(filters, kernel, dim))
    b = rng.normal(size=filters)
    return emb, lengths, w, b


shapes = st.tuples(
    st.integers(1, 5),   # batch
    st.integers(1, 4),   # extra width beyond kernel
    st.integers(1, 7),   # dim
    st.integers(1, 6),   # filters
    st.integers(1, 3),   # kernel
)


@settings(max_examples=60, deadline=None)
@given(shapes=shapes, seed=st.integers(0, 2**32 - 1))
def test_forward_backends_agree(shapes, seed):
    batch, extra, dim, filters, kernel = shapes
    width = kernel + extra - 1  # always >= kernel, sometimes == kernel
    rng = np.random.default_rng(seed)
    emb, lengths, w, b = random_case(rng, batch, width, dim, filters, kernel)

    pooled_py, argmax_py = kernels_py.conv_pool_forward(emb, lengths, w, b)
    compiled = backends.get_backend("compiled")
    pooled_c, argmax_c = compiled.conv_pool_forward(emb, lengths, w, b)

    np.testing.assert_allclose(pooled_py, pooled_c, rtol=1e-12, atol=1e-13)
    np.testing.assert_array_equal(argmax_py, argmax_c)


@settings(max_examples=60, deadline=None)
@given(shapes=shapes, seed=st.integers(0, 2**32 - 1))
def test_backward_backends_agree(shapes, seed):
    batch, extra, dim, filters, kernel = shapes
    width = kernel + extra - 1
    rng = np.random.default_rng(seed)
    emb, lengths, w, b = random_case(rng, batch, width, dim, filters, kernel)

    pooled, argmax = kernels_py.conv_pool_forward(emb, lengths, w, b)
    dpooled = rng.normal(size=pooled.shape)
    dpre = np.where(pooled > 0.0, dpooled, 0.0)

    dw_py = kernels_py.conv_pool_backward(emb, argmax, dpre, kernel)
    compiled = backends.get_backend("compiled")
    dw_c = compiled.conv_pool_backward(emb, argmax, dpre, kernel)

    np.testing.assert_allclose(dw_py, dw_c, rtol=1e-12, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(shapes=shapes, seed=st.integers(0, 2**32 - 1))
def test_integer_valued_input_is_bit_exact(shapes, seed):
    # integer sums are exact in float64, so any disagreement here is a
    # semantic bug (masking, clamping, argmax), not accumulation order
    batch, extra, dim, filters, kernel = shapes
    width = kernel + extra - 1
    rng = np.random.default_rng(seed)
    emb = rng.integers(-3, 4, size=(batch, width, dim)).astype(np.float64)
    lengths = rng.integers(0, width + 1, size=batch).astype(np.int64)
    w = rng.integers(-3, 4, size=(filters, kernel, dim)).astype(np.float64)
    b = rng.integers(-3, 4, size=filters).astype(np.float64)

    compiled = backends.get_backend("compiled")
    pooled_py, argmax_py = kernels_py.conv_pool_forward(emb, lengths, w, b)
    pooled_c, argmax_c = compiled.conv_pool_forward(emb, lengths, w, b)
    np.testing.assert_array_equal(pooled_py, pooled_c)
    np.testing.assert_array_equal(argmax_py, argmax_c)

    dpre = np.where(
        pooled_py > 0.0,
        rng.integers(-3, 4, size=pooled_py.shape).astype(np.float64),
        0.0,
    )
    dw_py = kernels_py.conv_pool_backward(emb, argmax_py, dpre, kernel)
    dw_c = compiled.conv_pool_backward(emb, argmax_c, dpre, kernel)
    np.testing.assert_array_equal(dw_py, dw_c)


def test_valid_window_counts_clamp_to_one():
    lengths = np.array([0, 1, 2, 3, 9], dtype=np.int64)
    wins = kernels_py.valid_windows(lengths, kernel=3)
    assert wins.tolist() == [1, 1, 1, 1, 7]


def test_forward_zero_length_doc_sees_only_bias():
    emb = np.zeros((1, 2, 3))
    lengths = np.array([0], dtype=np.int64)
    w = np.ones((2, 2, 3))
    b = np.array([0.5, -0.5])
    pooled, argmax = kernels_py.conv_pool_forward(emb, lengths, w, b)
    np.testing.assert_array_equal(pooled, [[0.5, 0.0]])
    assert argmax.tolist() == [[0, 0]]


def test_windows_beyond_length_are_ignored():
    # second doc is shorter; its trailing rows must not affect pooling
    rng = np.random.default_rng(0)
    emb = rng.normal(size=(2, 6, 4))
    w = rng.normal(size=(3, 2, 4))
    b = rng.normal(size=3)
    lengths = np.array([6, 3], dtype=np.int64)
    pooled_a, _ = kernels_py.conv_pool_forward(emb, lengths, w, b)
    emb2 = emb.copy()
    emb2[1, 3:] = 99.0  # garbage past the document end
    pooled_b, _ = kernels_py.conv_pool_forward(emb2, lengths, w, b)
    np.testing.assert_array_equal(pooled_a[1], pooled_b[1])
    if backends.HAVE_COMPILED:
        compiled = backends.get_backend("compiled")
        pooled_c, _ = compiled.conv_pool_forward(emb2, lengths, w, b)
        np.testing.assert_array_equal(pooled_b, pooled_c)


def test_backend_selection():
    assert "numpy" in backends.available_backends()
    assert backends.get_backend("numpy").NAME == "numpy"
    with pytest.raises(ValueError):
        backends.get_backend("no-such-backend")


def test_backend_env_override(monkeypatch):
    monkeypatch.setenv("REGCORE_KERNEL", "numpy")
    assert backends.get_backend(None).NAME == "numpy"
    monkeypatch.setenv("REGCORE_KERNEL", "bogus")
    with pytest.raises(ValueError):
        backends.get_backend(None)
