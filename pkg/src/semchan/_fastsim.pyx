# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops of the block-code simulator."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

TIE_TOL = 1e-9


def sample_outputs(const double[:, ::1] uniforms, const long long[::1] codeword,
                   const double[:, ::1] cdf):
    """Inverse-CDF draw of every channel output for one transmitted codeword."""
    cdef Py_ssize_t t, i, lo, hi, mid
    cdef Py_ssize_t trials = uniforms.shape[0], n = uniforms.shape[1], q = cdf.shape[1]
    cdef double u
    cdef long long x
    out = np.empty((trials, n), dtype=np.int64)
    cdef long long[:, ::1] y = out
    if codeword.shape[0] != n:
        raise ValueError("codeword length differs from the uniform block width")
    with nogil:
        for t in range(trials):
            for i in range(n):
                u = uniforms[t, i]
                x = codeword[i]
                # first j with u < cdf[x, j]
                lo = 0
                hi = q - 1
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if u < cdf[x, mid]:
                        hi = mid
                    else:
                        lo = mid + 1
                y[t, i] = lo
    return out


def ml_decode(const long long[:, ::1] received, const long long[:, ::1] codebook,
              const double[:, ::1] logw):
    """Index of the most likely codeword per row, first in order on ties."""
    cdef Py_ssize_t t, k, i
    cdef Py_ssize_t trials = received.shape[0], n = received.shape[1], m = codebook.shape[0]
    cdef double best, ll
    cdef double tie = TIE_TOL
    cdef Py_ssize_t arg
    out = np.empty(trials, dtype=np.int64)
    cdef long long[::1] dec = out
    if codebook.shape[1] != n:
        raise ValueError("codebook blocklength differs from the received blocks")
    with nogil:
        for t in range(trials):
            best = -1.0 / 0.0
            for k in range(m):
                ll = 0.0
                for i in range(n):
                    ll = ll + logw[codebook[k, i], received[t, i]]
                if ll > best:
                    best = ll
            arg = 0
            for k in range(m):
                ll = 0.0
                for i in range(n):
                    ll = ll + logw[codebook[k, i], received[t, i]]
                if ll >= best - tie:
                    arg = k
                    break
            dec[t] = arg
    return out
