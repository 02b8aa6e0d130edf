# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled contraction kernels for multilinear operator integrals.

Mirrors ``_contract_py.contract`` for k = 2 and k = 3.  The symbol table is
indexed by the first slot and the colex rank of the sorted multiset of the
remaining indices; ranks are computed inline from precomputed binomial
arrays, so the kernel never materializes a rank tensor.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def contract2(cnp.complex128_t[:, ::1] table,
              cnp.complex128_t[:, ::1] w1,
              cnp.complex128_t[:, ::1] w2):
    cdef Py_ssize_t m_dim = w1.shape[0]
    cdef Py_ssize_t n = w1.shape[1]
    out_arr = np.zeros((m_dim, n), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef Py_ssize_t a, m, j, lo, hi, r
    cdef cnp.complex128_t w1am
    for a in range(m_dim):
        for m in range(n):
            w1am = w1[a, m]
            if w1am == 0:
                continue
            for j in range(n):
                if m <= j:
                    lo = m; hi = j
                else:
                    lo = j; hi = m
                r = lo + ((hi + 1) * hi) // 2
                out[a, j] = out[a, j] + table[a, r] * w1am * w2[m, j]
    return out_arr


def contract3(cnp.complex128_t[:, ::1] table,
              cnp.complex128_t[:, ::1] w1,
              cnp.complex128_t[:, ::1] w2,
              cnp.complex128_t[:, ::1] w3):
    cdef Py_ssize_t m_dim = w1.shape[0]
    cdef Py_ssize_t n = w1.shape[1]
    out_arr = np.zeros((m_dim, n), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef Py_ssize_t a, m, p, j, s0, s1, s2, t, r
    cdef cnp.complex128_t w1am, chain
    for a in range(m_dim):
        for m in range(n):
            w1am = w1[a, m]
            if w1am == 0:
                continue
            for p in range(n):
                chain = w1am * w2[m, p]
                if chain == 0:
                    continue
                for j in range(n):
                    # sort (m, p, j) ascending
                    s0 = m; s1 = p; s2 = j
                    if s0 > s1:
                        t = s0; s0 = s1; s1 = t
                    if s1 > s2:
                        t = s1; s1 = s2; s2 = t
                    if s0 > s1:
                        t = s0; s0 = s1; s1 = t
                    r = s0 + ((s1 + 1) * s1) // 2 + ((s2 + 2) * (s2 + 1) * s2) // 6
                    out[a, j] = out[a, j] + table[a, r] * chain * w3[p, j]
    return out_arr
