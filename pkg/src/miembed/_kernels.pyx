"""Compiled per-bag kernels: embedding, min-distance pooling, hinge losses.

Semantics match ``miembed._kernels_py`` exactly; see that module for the
shared conventions (status codes, tie rules, strict hinge activation).
The two large matrix products (feature embedding and the gradient
outer-product accumulation) go through BLAS dgemm; everything else is
plain C loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef void _matmul_feats_weightT(double[:, ::1] weight, double[:, ::1] feats,
                                double[:, ::1] out) noexcept nogil:
    # out (n x s, row-major) = feats (n x f) @ weight.T (f x s)
    cdef int n = <int>feats.shape[0]
    cdef int f = <int>feats.shape[1]
    cdef int s = <int>weight.shape[0]
    cdef double one = 1.0, zero = 0.0
    cdef char ta = b'T', tb = b'N'
    # column-major view: out' (s x n) = weight'^T (s x f) @ feats' (f x n)
    dgemm(&ta, &tb, &s, &n, &f, &one,
          &weight[0, 0], &f, &feats[0, 0], &f, &zero, &out[0, 0], &s)


def embed_features(double[:, ::1] weight, double[:, ::1] feats):
    cdef Py_ssize_t n = feats.shape[0]
    cdef Py_ssize_t s = weight.shape[0]
    emb_arr = np.empty((n, s), dtype=np.float64)
    norm_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] emb = emb_arr
    cdef double[::1] norms = norm_arr
    cdef Py_ssize_t i, j
    cdef double nrm
    _matmul_feats_weightT(weight, feats, emb)
    for i in range(n):
        nrm = 0.0
        for j in range(s):
            nrm += emb[i, j] * emb[i, j]
        nrm = sqrt(nrm)
        if not nrm > 0.0:
            return i, None, None
        norms[i] = nrm
        for j in range(s):
            emb[i, j] /= nrm
    return -1, emb_arr, norm_arr


def min_label_distances(double[:, ::1] weight, double[:, ::1] feats,
                        double[:, ::1] labels):
    cdef Py_ssize_t n = feats.shape[0]
    cdef Py_ssize_t s = weight.shape[0]
    cdef Py_ssize_t t = labels.shape[0]

    status, emb_arr, _ = embed_features(weight, feats)
    if status >= 0:
        return status, None, None
    cdef double[:, ::1] emb = emb_arr

    dmin_arr = np.empty(t, dtype=np.float64)
    argmin_arr = np.empty(t, dtype=np.intp)
    cdef double[::1] dmin = dmin_arr
    cdef cnp.intp_t[::1] argmin = argmin_arr
    cdef Py_ssize_t i, j, k
    cdef double dist, diff, best
    cdef Py_ssize_t best_i
    for k in range(t):
        best = 0.0
        best_i = 0
        for i in range(n):
            dist = 0.0
            for j in range(s):
                diff = emb[i, j] - labels[k, j]
                dist += diff * diff
            if i == 0 or dist < best:
                best = dist
                best_i = i
        dmin[k] = best
        argmin[k] = best_i
    return -1, dmin_arr, argmin_arr


def ranking_loss_grad(double[:, ::1] weight, double[:, ::1] feats,
                      double[:, ::1] labels,
                      cnp.intp_t[::1] pos, cnp.intp_t[::1] neg,
                      double margin,
                      bint whole_image_only, bint rank_weighted,
                      bint exclude_positives, bint force_unit_weights,
                      double[:, ::1] grad_out):
    cdef Py_ssize_t n = feats.shape[0]
    cdef Py_ssize_t f = feats.shape[1]
    cdef Py_ssize_t s = weight.shape[0]
    cdef Py_ssize_t t = labels.shape[0]
    cdef Py_ssize_t num_pos = pos.shape[0]
    cdef Py_ssize_t num_neg = neg.shape[0]

    cdef Py_ssize_t i, j, d, k, jp, kn, c
    for j in range(s):
        for d in range(f):
            grad_out[j, d] = 0.0

    status, emb_arr, norm_arr = embed_features(weight, feats)
    if status >= 0:
        return status, 0.0
    cdef double[:, ::1] emb = emb_arr
    cdef double[::1] norms = norm_arr

    # per-label min distance and argmin (instance 0 only in whole-image mode)
    dmin_arr = np.empty(t, dtype=np.float64)
    argmin_arr = np.zeros(t, dtype=np.intp)
    cdef double[::1] dmin = dmin_arr
    cdef cnp.intp_t[::1] argmin = argmin_arr
    cdef Py_ssize_t scan = 1 if whole_image_only else n
    cdef double dist, diff, best
    cdef Py_ssize_t best_i
    for k in range(t):
        best = 0.0
        best_i = 0
        for i in range(scan):
            dist = 0.0
            for j in range(s):
                diff = emb[i, j] - labels[k, j]
                dist += diff * diff
            if i == 0 or dist < best:
                best = dist
                best_i = i
        dmin[k] = best
        argmin[k] = best_i

    cdef char[::1] is_pos = np.zeros(t, dtype=np.int8)
    for jp in range(num_pos):
        is_pos[pos[jp]] = 1

    weights_arr = np.ones(num_pos, dtype=np.float64)
    cdef double[::1] weights = weights_arr
    cdef Py_ssize_t rank
    cdef double dj
    if rank_weighted:
        for jp in range(num_pos):
            dj = dmin[pos[jp]]
            rank = 0
            for k in range(t):
                if k == pos[jp]:
                    continue
                if exclude_positives and is_pos[k]:
                    continue
                if dmin[k] <= dj:
                    rank += 1
            if rank >= num_pos:
                weights[jp] = <double>rank
            if force_unit_weights:
                weights[jp] = 1.0

    alpha_arr = np.zeros(t, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double value = 0.0
    cdef bint any_active = False
    cdef double h, wj
    for jp in range(num_pos):
        wj = weights[jp]
        dj = dmin[pos[jp]]
        for kn in range(num_neg):
            h = margin + dj - dmin[neg[kn]]
            if h > 0.0:
                value += wj * h
                alpha[pos[jp]] += wj
                alpha[neg[kn]] -= wj
                any_active = True
    if not any_active:
        return -1, value

    # distance gradients flow through each label's argmin instance
    per_inst_arr = np.zeros((n, s), dtype=np.float64)
    cdef double[:, ::1] per_inst = per_inst_arr
    cdef double a, dot, coef
    for k in range(t):
        a = alpha[k]
        if a == 0.0:
            continue
        c = argmin[k]
        dot = 0.0
        for j in range(s):
            dot += emb[c, j] * labels[k, j]
        coef = 2.0 * a / norms[c]
        for j in range(s):
            per_inst[c, j] += coef * (dot * emb[c, j] - labels[k, j])

    # grad_out (s x f) += per_inst.T (s x n) @ feats (n x f)
    cdef int bn = <int>n, bf = <int>f, bs = <int>s
    cdef double one = 1.0
    cdef char ta = b'N', tb = b'T'
    # column-major view: grad' (f x s) += feats' (f x n) @ per_inst'^T (n x s)
    dgemm(&ta, &tb, &bf, &bs, &bn, &one,
          &feats[0, 0], &bf, &per_inst[0, 0], &bs, &one, &grad_out[0, 0], &bf)
    return -1, value
