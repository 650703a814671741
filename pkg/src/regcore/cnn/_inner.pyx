# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution/pooling kernels.

Same contract as ``regcore.cnn.kernels_py`` (see its docstring). The win
over the NumPy path comes from doing only each document's valid window
range (short documents in a padded batch cost what they are, not what the
batch width is) and from fusing bias, ReLU, max, and argmax into one scan
without materializing the full batch-by-position-by-filter activation
tensor.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "compiled"


def conv_pool_forward(
    double[:, :, ::1] emb not None,
    cnp.int64_t[::1] lengths not None,
    double[:, :, ::1] weights not None,
    double[::1] bias not None,
):
    cdef Py_ssize_t n_docs = emb.shape[0]
    cdef Py_ssize_t width = emb.shape[1]
    cdef Py_ssize_t dim = emb.shape[2]
    cdef Py_ssize_t n_filters = weights.shape[0]
    cdef Py_ssize_t kernel = weights.shape[1]
    if weights.shape[2] != dim:
        raise ValueError("weights/embedding dimensionality mismatch")
    if width < kernel:
        raise ValueError("batch width shorter than kernel")
    if lengths.shape[0] != n_docs:
        raise ValueError("lengths/batch size mismatch")

    cdef Py_ssize_t max_win = width - kernel + 1
    pooled_arr = np.empty((n_docs, n_filters), dtype=np.float64)
    argmax_arr = np.zeros((n_docs, n_filters), dtype=np.int64)
    acts_arr = np.empty((max_win, n_filters), dtype=np.float64)
    cdef double[:, ::1] pooled = pooled_arr
    cdef cnp.int64_t[:, ::1] argmax = argmax_arr
    cdef double[:, ::1] acts = acts_arr

    cdef int m = <int> n_filters
    cdef int k_blas = <int> dim
    cdef int lda = <int> (kernel * dim)
    cdef int ldb = <int> dim
    cdef int ldc = <int> n_filters
    cdef int n_blas
    cdef double one = 1.0
    cdef double alpha = 1.0
    cdef Py_ssize_t i, j, p, f, n_win
    cdef double value, best
    cdef Py_ssize_t best_idx

    with nogil:
        for i in range(n_docs):
            n_win = lengths[i] - kernel + 1
            if n_win < 1:
                n_win = 1
            elif n_win > max_win:
                n_win = max_win
            for p in range(n_win):
                for f in range(n_filters):
                    acts[p, f] = bias[f]
            n_blas = <int> n_win
            for j in range(kernel):
                # acts[:n_win] += emb[i, j:j+n_win, :] @ weights[:, j, :].T
                # expressed column-major: C(F x n_win) = W_j(F x d) @ X_j^T(d x n_win)
                dgemm(
                    "T", "N", &m, &n_blas, &k_blas, &alpha,
                    &weights[0, j, 0], &lda,
                    &emb[i, j, 0], &ldb,
                    &one, &acts[0, 0], &ldc,
                )
            for f in range(n_filters):
                best = acts[0, f]
                if best < 0.0:
                    best = 0.0
                best_idx = 0
                for p in range(1, n_win):
                    value = acts[p, f]
                    if value < 0.0:
                        value = 0.0
                    if value > best:
                        best = value
                        best_idx = p
                pooled[i, f] = best
                argmax[i, f] = best_idx
    return pooled_arr, argmax_arr


def conv_pool_backward(
    double[:, :, ::1] emb not None,
    cnp.int64_t[:, ::1] argmax not None,
    double[:, ::1] dpre not None,
    int kernel,
):
    cdef Py_ssize_t n_docs = emb.shape[0]
    cdef Py_ssize_t dim = emb.shape[2]
    cdef Py_ssize_t n_filters = dpre.shape[1]
    grad_arr = np.zeros((n_filters, kernel, dim), dtype=np.float64)
    cdef double[:, :, ::1] grad_w = grad_arr
    cdef Py_ssize_t i, j, f, r, p
    cdef double g
    with nogil:
        for i in range(n_docs):
            for f in range(n_filters):
                g = dpre[i, f]
                if g == 0.0:
                    continue
                p = argmax[i, f]
                for j in range(kernel):
                    for r in range(dim):
                        grad_w[f, j, r] += g * emb[i, p + j, r]
    return grad_arr
