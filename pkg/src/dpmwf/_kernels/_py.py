"""NumPy fallback for the hot per-bin kernels.

These functions are vectorized over the bin axis but perform, per bin, the
same scalar operations in the same order as the compiled kernel in
``_core.pyx``; the two backends produce bit-identical output. When editing
either implementation keep the arithmetic sequences in sync (no reordering,
no fused expressions on one side only).
"""

import numpy as np

# Shared numerical policy (mirrored in _core.pyx).
COND_LIMIT = 1e12  # diagonal loading kicks in above this condition estimate
LOAD_DELTA = 1e-10  # loading is LOAD_DELTA * trace / M
DEN_GUARD = 1e-30  # mixing-factor denominator below this falls back to a

FLAG_SILENT = 1  # mixture trace <= 0: filter zeroed
FLAG_LOADED = 2  # diagonal loading applied
FLAG_FAILED = 4  # factorization failed even after loading: filter zeroed
FLAG_APRIME_CLAMPED = 8  # mixing factor fell outside [a, 1] before clamping
FLAG_TAUW_CLAMPED = 16  # trace(W Rnn) had negative real part, clamped to 0


def sliding_cov(x, window):
    """Causal sliding-window sample covariance.

    ``x`` is a (T, F, M) complex spectrogram; the result is (T, F, M, M) with
    ``R[t] = mean(outer(x[k], x[k]) for k in [max(0, t-window+1), t])``.
    Window terms are summed oldest-to-newest.
    """
    T = x.shape[0]
    outer = x[:, :, :, np.newaxis] * np.conj(x[:, :, np.newaxis, :])
    acc = np.zeros_like(outer)
    for off in range(window - 1, -1, -1):
        if off >= T:
            continue
        acc[off:] += outer[: T - off]
    counts = np.minimum(np.arange(T) + 1, window).astype(np.float64)
    return acc / counts[:, np.newaxis, np.newaxis, np.newaxis]


def batch_cholesky(A):
    """Lower Cholesky factors of a batch of Hermitian matrices.

    Returns ``(d, lo, ok)``: real diagonals (B, M), strictly-lower complex
    parts (B, M, M), and a per-matrix success mask. A failed matrix (pivot
    <= 0) keeps computing with a substituted unit pivot so the rest of the
    batch is unaffected; its output must be discarded by the caller.
    """
    B, M, _ = A.shape
    d = np.zeros((B, M))
    lo = np.zeros((B, M, M), dtype=np.complex128)
    ok = np.ones(B, dtype=bool)
    with np.errstate(all="ignore"):
        for i in range(M):
            s = A[:, i, i].real.copy()
            for k in range(i):
                s -= lo[:, i, k].real ** 2 + lo[:, i, k].imag ** 2
            good = s > 0
            ok &= good
            s = np.where(good, s, 1.0)
            di = np.sqrt(s)
            d[:, i] = di
            for j in range(i + 1, M):
                acc = A[:, j, i].copy()
                for k in range(i):
                    acc -= lo[:, j, k] * np.conj(lo[:, i, k])
                lo[:, j, i] = acc / di
    return d, lo, ok


def _solve_cholesky(d, lo, rhs):
    """Solve ``L L^H V = rhs`` per batch entry from Cholesky pieces."""
    B, M, _ = rhs.shape
    V = np.empty_like(rhs)
    with np.errstate(all="ignore"):
        for col in range(M):
            y = [None] * M
            for i in range(M):
                acc = rhs[:, i, col].copy()
                for k in range(i):
                    acc -= lo[:, i, k] * y[k]
                y[i] = acc / d[:, i]
            v = [None] * M
            for i in range(M - 1, -1, -1):
                acc = y[i]
                for k in range(i + 1, M):
                    acc = acc - np.conj(lo[:, k, i]) * v[k]
                v[i] = acc / d[:, i]
                V[:, i, col] = v[i]
    return V


def dp_mwf_field(Rxx, Rnn, a, mu, nu):
    """Direction-preserving MIMO Wiener filters for a batch of bins.

    ``Rxx`` and ``Rnn`` are (B, M, M) Hermitian PSD batches. Returns
    ``(W, aprime, flags)`` where ``W`` is the (B, M, M) filter batch,
    ``aprime`` the per-bin identity-mixing factor, and ``flags`` the
    per-bin FLAG_* bitmask.
    """
    B, M, _ = Rxx.shape
    W = np.zeros((B, M, M), dtype=np.complex128)
    aprime = np.full(B, a, dtype=np.float64)
    flags = np.zeros(B, dtype=np.uint8)
    if B == 0:
        return W, aprime, flags

    with np.errstate(all="ignore"):
        txx = np.zeros(B)
        for i in range(M):
            txx = txx + Rxx[:, i, i].real
        active = txx > 0
        flags[~active] |= FLAG_SILENT

        c = mu + nu - 1.0
        D = Rxx + c * Rnn
        trd = np.zeros(B)
        for i in range(M):
            trd = trd + D[:, i, i].real

        d, lo, ok1 = batch_cholesky(D)
        dmax = d.max(axis=1)
        dmin = d.min(axis=1)
        ratio = dmax / dmin
        need = active & (~ok1 | (ratio * ratio > COND_LIMIT))
        failed = np.zeros(B, dtype=bool)
        if need.any():
            flags[need] |= FLAG_LOADED
            load = LOAD_DELTA * (trd / M)
            D2 = D[need].copy()
            for i in range(M):
                D2[:, i, i] = D[need, i, i] + load[need]
            d2, lo2, ok2 = batch_cholesky(D2)
            d[need] = d2
            lo[need] = lo2
            failed[need] = ~ok2
            flags[need & failed] |= FLAG_FAILED

        good = active & ~failed
        V = _solve_cholesky(d, lo, Rxx - Rnn)  # W_{mu+nu} = V^H

        tauN = np.zeros(B)
        for i in range(M):
            tauN = tauN + Rnn[:, i, i].real
        tauW = np.zeros(B)
        for i in range(M):
            for k in range(M):
                tauW = tauW + (
                    V[:, k, i].real * Rnn[:, k, i].real
                    + V[:, k, i].imag * Rnn[:, k, i].imag
                )
        neg = good & (tauW < 0)
        flags[neg] |= FLAG_TAUW_CLAMPED
        tauW = np.where(tauW < 0, 0.0, tauW)

        nw = nu * tauW
        den = mu * tauN + nw
        ap = a + (1.0 - a) * (nw / den)
        ap = np.where(den <= DEN_GUARD, a, ap)
        out_of_range = good & ((ap < a) | (ap > 1.0))
        flags[out_of_range] |= FLAG_APRIME_CLAMPED
        ap = np.minimum(1.0, np.maximum(a, ap))

        scale = 1.0 - ap
        Wall = scale[:, np.newaxis, np.newaxis] * np.conj(
            np.transpose(V, (0, 2, 1))
        )
        for i in range(M):
            Wall[:, i, i] += ap
        W[good] = Wall[good]
        aprime[good] = ap[good]
    return W, aprime, flags
