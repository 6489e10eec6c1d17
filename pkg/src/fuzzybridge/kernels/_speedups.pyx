# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for batched firing-level evaluation.

Same contract as fuzzybridge.kernels.fallback; this version runs the
N x K x clauses triple loop in C.
"""

from libc.math cimport exp, log1p

import numpy as np


cdef inline double _softplus(double z) noexcept nogil:
    if z > 0.0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


def batch_log_firings(const double[:, ::1] X, const int[::1] rule_ptr,
                      const int[::1] feature, const int[::1] kind,
                      const double[::1] p0, const double[::1] p1):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_rules = rule_ptr.shape[0] - 1
    out_arr = np.zeros((n, n_rules))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, j
    cdef double acc, xi, d, z
    with nogil:
        for i in range(n):
            for k in range(n_rules):
                acc = 0.0
                for j in range(rule_ptr[k], rule_ptr[k + 1]):
                    xi = X[i, feature[j]]
                    if kind[j] == 0:
                        d = xi - p0[j]
                        acc -= (d * d) / p1[j]
                    elif kind[j] == 1:
                        z = p1[j] * (xi - p0[j])
                        acc -= _softplus(-z)
                    else:
                        z = p1[j] * (xi - p0[j])
                        acc -= _softplus(z)
                out[i, k] = acc
    return out_arr
