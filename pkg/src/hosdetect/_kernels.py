"""Hot loops.  Each kernel has a loop form (numba-compiled when available) and
a vectorised numpy form; ``bispectrum_canonical`` and friends dispatch on the
configured backend.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


# --- bispectrum -------------------------------------------------------------


@njit
def _bispectrum_loops(X, K):
    M = X.shape[0]
    B = np.zeros((K + 1, K + 1), dtype=np.complex128)
    for m in range(1, K // 2 + 1):
        for n in range(m, K - m + 1):
            acc = 0j
            for i in range(M):
                acc += X[i, m] * X[i, n] * np.conj(X[i, m + n])
            acc /= M
            B[m, n] = acc
            B[n, m] = acc
    return B


def _bispectrum_numpy(X, K):
    B = np.zeros((K + 1, K + 1), dtype=np.complex128)
    Xc = np.conj(X)
    for m in range(1, K // 2 + 1):
        n = np.arange(m, K - m + 1)
        vals = np.mean(X[:, m, None] * X[:, n] * Xc[:, m + n], axis=0)
        B[m, n] = vals
        B[n, m] = vals
    return B


# --- trispectrum ------------------------------------------------------------


@njit
def _trispectrum_loops(X, K, Kt):
    M = X.shape[0]
    T = np.zeros((Kt + 1, Kt + 1, Kt + 1), dtype=np.complex128)
    for m in range(1, Kt + 1):
        for n in range(m, Kt + 1):
            if m + 2 * n > K:
                break
            top = min(Kt, K - m - n)
            for o in range(n, top + 1):
                acc = 0j
                for i in range(M):
                    acc += X[i, m] * X[i, n] * X[i, o] * np.conj(X[i, m + n + o])
                acc /= M
                T[m, n, o] = acc
                T[m, o, n] = acc
                T[n, m, o] = acc
                T[n, o, m] = acc
                T[o, m, n] = acc
                T[o, n, m] = acc
    return T


def _trispectrum_numpy(X, K, Kt):
    T = np.zeros((Kt + 1, Kt + 1, Kt + 1), dtype=np.complex128)
    Xc = np.conj(X)
    ms, ns, os_, vals = [], [], [], []
    for m in range(1, Kt + 1):
        for n in range(m, Kt + 1):
            if m + 2 * n > K:
                break
            o = np.arange(n, min(Kt, K - m - n) + 1)
            pair = X[:, m] * X[:, n]
            vals.append(np.mean(pair[:, None] * X[:, o] * Xc[:, m + n + o], axis=0))
            ms.append(np.full(o.size, m))
            ns.append(np.full(o.size, n))
            os_.append(o)
    if not vals:
        return T
    m, n, o, v = (np.concatenate(a) for a in (ms, ns, os_, vals))
    for a, b, c in ((m, n, o), (m, o, n), (n, m, o), (n, o, m), (o, m, n), (o, n, m)):
        T[a, b, c] = v
    return T


def bispectrum_canonical(X, K):
    if USE_NUMBA:
        return _bispectrum_loops(X, K)
    return _bispectrum_numpy(X, K)


def trispectrum_canonical(X, K, Kt):
    if USE_NUMBA:
        return _trispectrum_loops(X, K, Kt)
    return _trispectrum_numpy(X, K, Kt)


KERNELS = {
    "bispectrum": {"loops": _bispectrum_loops, "numpy": _bispectrum_numpy},
    "trispectrum": {"loops": _trispectrum_loops, "numpy": _trispectrum_numpy},
}
