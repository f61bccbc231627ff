# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-bin kernels.

``_py.py`` is the reference implementation; the scalar operation order here
matches it exactly, so both backends return bit-identical results (the
extension is compiled with -ffp-contract=off to rule out FMA contraction).
Keep the two files in sync when changing the numerics.
"""

import numpy as np

from libc.math cimport sqrt

ctypedef double complex zdouble

cdef double COND_LIMIT = 1e12
cdef double LOAD_DELTA = 1e-10
cdef double DEN_GUARD = 1e-30

cdef int FLAG_SILENT = 1
cdef int FLAG_LOADED = 2
cdef int FLAG_FAILED = 4
cdef int FLAG_APRIME_CLAMPED = 8
cdef int FLAG_TAUW_CLAMPED = 16


def sliding_cov(zdouble[:, :, ::1] x, int window):
    """Causal sliding-window sample covariance of a (T, F, M) spectrogram."""
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t F = x.shape[1]
    cdef Py_ssize_t M = x.shape[2]
    out_arr = np.zeros((T, F, M, M), dtype=np.complex128)
    cdef zdouble[:, :, :, ::1] R = out_arr
    cdef Py_ssize_t t, f, i, j, k, k0, cnt
    cdef zdouble acc
    with nogil:
        for f in range(F):
            for t in range(T):
                k0 = t - window + 1
                if k0 < 0:
                    k0 = 0
                cnt = t - k0 + 1
                for i in range(M):
                    for j in range(M):
                        acc = 0
                        for k in range(k0, t + 1):
                            acc = acc + x[k, f, i] * x[k, f, j].conjugate()
                        R[t, f, i, j] = acc / (<double> cnt)
    return out_arr


cdef int _chol(zdouble[:, ::1] A, double[::1] d, zdouble[:, ::1] lo,
               Py_ssize_t M) noexcept nogil:
    """Lower Cholesky of Hermitian A into (d, lo); 0 on pivot failure."""
    cdef Py_ssize_t i, j, k
    cdef double s, lr, li
    cdef zdouble acc
    for i in range(M):
        s = A[i, i].real
        for k in range(i):
            lr = lo[i, k].real
            li = lo[i, k].imag
            s = s - (lr * lr + li * li)
        if not (s > 0):
            return 0
        d[i] = sqrt(s)
        for j in range(i + 1, M):
            acc = A[j, i]
            for k in range(i):
                acc = acc - lo[j, k] * lo[i, k].conjugate()
            lo[j, i] = acc / d[i]
    return 1


def dp_mwf_field(zdouble[:, :, ::1] Rxx, zdouble[:, :, ::1] Rnn,
                 double a, double mu, double nu):
    """Direction-preserving MIMO Wiener filters for a batch of bins.

    Same contract as ``_py.dp_mwf_field``.
    """
    cdef Py_ssize_t B = Rxx.shape[0]
    cdef Py_ssize_t M = Rxx.shape[1]
    W_arr = np.zeros((B, M, M), dtype=np.complex128)
    ap_arr = np.full(B, a, dtype=np.float64)
    flag_arr = np.zeros(B, dtype=np.uint8)
    cdef zdouble[:, :, ::1] W = W_arr
    cdef double[::1] aprime = ap_arr
    cdef unsigned char[::1] flags = flag_arr

    D_arr = np.empty((M, M), dtype=np.complex128)
    lo_arr = np.zeros((M, M), dtype=np.complex128)
    V_arr = np.empty((M, M), dtype=np.complex128)
    d_arr = np.empty(M, dtype=np.float64)
    y_arr = np.empty(M, dtype=np.complex128)
    cdef zdouble[:, ::1] D = D_arr
    cdef zdouble[:, ::1] lo = lo_arr
    cdef zdouble[:, ::1] V = V_arr
    cdef double[::1] d = d_arr
    cdef zdouble[::1] y = y_arr

    cdef Py_ssize_t b, i, j, k, col
    cdef double c = mu + nu - 1.0
    cdef double txx, trd, dmax, dmin, ratio, load
    cdef double tauN, tauW, nw, den, ap, scale, vr, vi
    cdef zdouble acc
    cdef int ok, need

    with nogil:
        for b in range(B):
            txx = 0.0
            for i in range(M):
                txx = txx + Rxx[b, i, i].real
            if not (txx > 0):
                flags[b] = flags[b] | FLAG_SILENT
                continue

            for i in range(M):
                for j in range(M):
                    D[i, j] = Rxx[b, i, j] + c * Rnn[b, i, j]
            trd = 0.0
            for i in range(M):
                trd = trd + D[i, i].real

            ok = _chol(D, d, lo, M)
            need = 0
            if ok:
                dmax = d[0]
                dmin = d[0]
                for i in range(1, M):
                    if d[i] > dmax:
                        dmax = d[i]
                    if d[i] < dmin:
                        dmin = d[i]
                ratio = dmax / dmin
                if ratio * ratio > COND_LIMIT:
                    need = 1
            else:
                need = 1
            if need:
                flags[b] = flags[b] | FLAG_LOADED
                load = LOAD_DELTA * (trd / M)
                for i in range(M):
                    for j in range(M):
                        D[i, j] = Rxx[b, i, j] + c * Rnn[b, i, j]
                for i in range(M):
                    D[i, i] = D[i, i] + load
                ok = _chol(D, d, lo, M)
                if not ok:
                    flags[b] = flags[b] | FLAG_FAILED
                    continue

            # V = D^{-1} (Rxx - Rnn); the filter is V^H
            for col in range(M):
                for i in range(M):
                    acc = Rxx[b, i, col] - Rnn[b, i, col]
                    for k in range(i):
                        acc = acc - lo[i, k] * y[k]
                    y[i] = acc / d[i]
                for i in range(M - 1, -1, -1):
                    acc = y[i]
                    for k in range(i + 1, M):
                        acc = acc - lo[k, i].conjugate() * V[k, col]
                    V[i, col] = acc / d[i]

            tauN = 0.0
            for i in range(M):
                tauN = tauN + Rnn[b, i, i].real
            tauW = 0.0
            for i in range(M):
                for k in range(M):
                    vr = V[k, i].real
                    vi = V[k, i].imag
                    tauW = tauW + (vr * Rnn[b, k, i].real + vi * Rnn[b, k, i].imag)
            if tauW < 0:
                flags[b] = flags[b] | FLAG_TAUW_CLAMPED
                tauW = 0.0

            nw = nu * tauW
            den = mu * tauN + nw
            if den <= DEN_GUARD:
                ap = a
            else:
                ap = a + (1.0 - a) * (nw / den)
                if ap < a or ap > 1.0:
                    flags[b] = flags[b] | FLAG_APRIME_CLAMPED
                if ap < a:
                    ap = a
                if ap > 1.0:
                    ap = 1.0

            scale = 1.0 - ap
            for i in range(M):
                for j in range(M):
                    W[b, i, j] = scale * V[j, i].conjugate()
            for i in range(M):
                W[b, i, i] = W[b, i, i] + ap
            aprime[b] = ap

    return W_arr, ap_arr, flag_arr
