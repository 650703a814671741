"""NumPy fallback for the convolution/pooling kernels.

Contract shared with the compiled backend (``regcore.cnn._inner``):

``conv_pool_forward(emb, lengths, weights, bias) -> (pooled, argmax)``
    emb      (B, P, d) float64, C-contiguous, PAD rows are all-zero
    lengths  (B,) int64, true token counts (0 <= length <= P), P >= kernel
    weights  (F, k, d) float64, bias (F,) float64
    pooled   (B, F) float64: max over valid window positions of
             ReLU(window . weights[f] + bias[f]); a document with
             length < k contributes its single (partially padded) window 0.
    argmax   (B, F) int64: position of the pooled maximum, first index on
             ties. Windows past a document's last full window are masked
             out, so appending padding never changes the result.

``conv_pool_backward(emb, argmax, dpre, kernel) -> conv_w gradient``
    dpre     (B, F) float64: upstream gradient already multiplied by the
             ReLU mask; routed entirely to each filter's argmax window.

Both backends produce identical results up to floating-point summation
order inside the underlying BLAS.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def valid_windows(lengths: np.ndarray, kernel: int) -> np.ndarray:
    """Number of pooled positions per document: max(1, length - kernel + 1)."""
    return np.maximum(lengths - kernel + 1, 1)


def conv_pool_forward(
    emb: np.ndarray, lengths: np.ndarray, weights: np.ndarray, bias: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n_docs, width, dim = emb.shape
    n_filters, kernel, _ = weights.shape
    if width < kernel:
        raise ValueError(f"batch width {width} shorter than kernel {kernel}")
    n_win = width - kernel + 1
    acts = np.empty((n_docs, n_win, n_filters), dtype=np.float64)
    acts[:] = bias
    flat = emb.reshape(n_docs * width, dim)
    for j in range(kernel):
        shifted = (flat @ weights[:, j, :].T).reshape(n_docs, width, n_filters)
        acts += shifted[:, j : j + n_win, :]
    mask = np.arange(n_win)[None, :] < valid_windows(lengths, kernel)[:, None]
    acts = np.where(mask[:, :, None], acts, -np.inf)
    relu = np.maximum(acts, 0.0)
    # Position 0 is always valid, so a first-index argmax can only land on a
    # masked position if it ties the (>= 0) maximum -- and ties resolve to
    # the earlier, valid index.
    argmax = relu.argmax(axis=1)
    pooled = np.take_along_axis(relu, argmax[:, None, :], axis=1)[:, 0, :]
    return pooled, argmax.astype(np.int64)


def conv_pool_backward(
    emb: np.ndarray, argmax: np.ndarray, dpre: np.ndarray, kernel: int
) -> np.ndarray:
    n_docs, width, dim = emb.shape
    n_filters = dpre.shape[1]
    grad_w = np.empty((n_filters, kernel, dim), dtype=np.float64)
    rows = np.arange(n_docs)[:, None]
    for j in range(kernel):
        windows = emb[rows, argmax + j, :]  # (B, F, d)
        grad_w[:, j, :] = np.einsum("bf,bfd->fd", dpre, windows)
    return grad_w
