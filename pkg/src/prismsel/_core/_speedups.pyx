# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled facility-location gain kernels.

These scalar loops dominate greedy selection time: every candidate
evaluation touches a full similarity column.  A numpy mirror lives in
``_fallback`` and both are interchangeable behind ``prismsel._core``.

Similarity columns may be float32 (large partitioned kernels) or
float64; running maxima and outputs are always float64.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

ctypedef fused floating:
    float
    double

# phi kinds shared with the fallback:
#   0: identity                      (plain facility location)
#   1: min(x, qcap_i)                (query-capped MI form)
#   2: max(x - pcap_i, 0)            (private-conditioned CG form)
#   3: max(min(x, qcap_i) - pcap_i, 0)

cdef inline double _phi(double x, int kind, double qcap, double pcap) noexcept nogil:
    cdef double v = x
    if kind == 1 or kind == 3:
        if qcap < v:
            v = qcap
    if kind == 2 or kind == 3:
        v -= pcap
        if v < 0.0:
            v = 0.0
    return v


def fl_gain(const double[::1] cur, const floating[::1] col, int kind,
            const double[::1] qcap, const double[::1] pcap):
    """sum_i phi(max(cur_i, col_i)) - phi(cur_i)."""
    cdef Py_ssize_t i, n = cur.shape[0]
    cdef double g = 0.0, x
    with nogil:
        for i in range(n):
            x = <double> col[i]
            if x > cur[i]:
                g += _phi(x, kind, qcap[i], pcap[i]) - _phi(cur[i], kind, qcap[i], pcap[i])
    return g


def fl_gains_many(const floating[:, ::1] cols, const double[::1] cur, int kind,
                  const double[::1] qcap, const double[::1] pcap):
    """Gain of each candidate row of ``cols`` against the running maxima."""
    cdef Py_ssize_t c, i, m = cols.shape[0], n = cols.shape[1]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double g, x
    with nogil:
        for c in range(m):
            g = 0.0
            for i in range(n):
                x = <double> cols[c, i]
                if x > cur[i]:
                    g += _phi(x, kind, qcap[i], pcap[i]) - _phi(cur[i], kind, qcap[i], pcap[i])
            out[c] = g
    return out_arr


def fl_commit(double[::1] cur, const floating[::1] col):
    """cur_i <- max(cur_i, col_i), in place."""
    cdef Py_ssize_t i, n = cur.shape[0]
    with nogil:
        for i in range(n):
            if <double> col[i] > cur[i]:
                cur[i] = <double> col[i]
