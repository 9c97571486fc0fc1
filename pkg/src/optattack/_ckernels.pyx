# cython: language_level=3
"""Compiled query kernels: ray points, small dense layers, flat tree ensembles."""
from libc.math cimport tanh, isfinite

import numpy as np

BACKEND = "cython"

cdef enum:
    ACT_IDENTITY = 0
    ACT_RELU = 1
    ACT_TANH = 2


def ray_point(const double[::1] x0, const double[::1] theta, double lam,
              const double[::1] lower, const double[::1] upper):
    cdef Py_ssize_t i, n = x0.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double v
    for i in range(n):
        v = x0[i] + lam * theta[i]
        if v < lower[i]:
            v = lower[i]
        elif v > upper[i]:
            v = upper[i]
        o[i] = v
    return out


def clip(const double[::1] x, const double[::1] lower, const double[::1] upper):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double v
    for i in range(n):
        v = x[i]
        if v < lower[i]:
            v = lower[i]
        elif v > upper[i]:
            v = upper[i]
        o[i] = v
    return out


def all_finite(const double[::1] x):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        if not isfinite(x[i]):
            return False
    return True


def sq_norm(const double[::1] x):
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return s


def dot(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


def affine(const double[:, ::1] weight, const double[::1] bias,
           const double[::1] x, int act):
    cdef Py_ssize_t i, j, m = weight.shape[0], n = weight.shape[1]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef double s
    for i in range(m):
        s = bias[i]
        for j in range(n):
            s += weight[i, j] * x[j]
        if act == ACT_RELU:
            if s < 0.0:
                s = 0.0
        elif act == ACT_TANH:
            s = tanh(s)
        o[i] = s
    return out


def gbdt_scores(const long long[::1] feature, const double[::1] threshold,
                const long long[::1] left, const long long[::1] right,
                const double[::1] value, const long long[::1] roots,
                const long long[::1] tree_output, const double[::1] x,
                Py_ssize_t n_outputs):
    cdef Py_ssize_t t, node
    out = np.zeros(n_outputs, dtype=np.float64)
    cdef double[::1] o = out
    for t in range(roots.shape[0]):
        node = roots[t]
        while feature[node] >= 0:
            if x[feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        o[tree_output[t]] += value[node]
    return out
