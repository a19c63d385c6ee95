"""Hot inner loops, each with a numba and a pure-numpy implementation.

The numba versions are used when numba imports and ``COLIM_NUMBA`` is not
set to ``0``/``false``/``off``. The numpy versions are always importable as
``*_numpy`` so both paths can be tested and benchmarked side by side.

Kernels
-------
linear_recurrence
    ``y[k] = F @ y[k-1] + e[k]`` over a block of steps, keeping every
    ``every``-th state. Every integrator in :mod:`colim.sde` reduces to this.
lagged_products
    ``sum_t x[t+k] x[t]^T / (N - k)`` for a list of lags. The numpy version
    is one BLAS product per lag and beats the compiled loop, so it is used
    on both backends; the numba version stays for cross-checking.
"""
import os

import numpy as np

_FLAG = os.environ.get("COLIM_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "false", "off", "no")

try:
    if not _WANT_NUMBA:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def linear_recurrence_numpy(F, e, y0, every):
    """Evaluate the recurrence with a log-depth prefix scan.

    Parameters
    ----------
    F : (d, d) ndarray
        One-step transition matrix.
    e : (L, d) ndarray
        Forcing for steps 1..L. ``L`` must be a multiple of ``every``.
    y0 : (d,) ndarray
        State before the first step.
    every : int
        Keep states ``every, 2*every, ..., L`` (1-based within the block).

    Returns
    -------
    kept : (L // every, d) ndarray
    last : (d,) ndarray
    """
    y = np.array(e, dtype=float, copy=True)
    y[0] += F @ y0
    L = y.shape[0]
    Fd = F.copy()
    d = 1
    while d < L:
        # y[k] <- y[k] + F^d y[k-d]; all reads come from the previous pass
        y[d:] += y[:-d] @ Fd.T
        Fd = Fd @ Fd
        d *= 2
    return y[every - 1::every].copy(), y[-1].copy()


def lagged_products_numpy(X, lags):
    N = X.shape[0]
    out = np.empty((len(lags), X.shape[1], X.shape[1]))
    for i, k in enumerate(lags):
        out[i] = X[k:].T @ X[:N - k] / (N - k)
    return out


if HAVE_NUMBA:
    @njit(cache=True)
    def _linear_recurrence_nb(F, e, y0, every):
        L, d = e.shape
        kept = np.empty((L // every, d))
        y = y0.copy()
        tmp = np.empty(d)
        j = 0
        for k in range(L):
            for a in range(d):
                s = e[k, a]
                for b in range(d):
                    s += F[a, b] * y[b]
                tmp[a] = s
            for a in range(d):
                y[a] = tmp[a]
            if (k + 1) % every == 0:
                for a in range(d):
                    kept[j, a] = y[a]
                j += 1
        return kept, y

    @njit(cache=True)
    def _lagged_products_nb(X, lags):
        N, n = X.shape
        out = np.zeros((lags.shape[0], n, n))
        for i in range(lags.shape[0]):
            k = lags[i]
            for t in range(N - k):
                for a in range(n):
                    xa = X[t + k, a]
                    for b in range(n):
                        out[i, a, b] += xa * X[t, b]
            out[i] /= N - k
        return out

    def linear_recurrence_numba(F, e, y0, every):
        return _linear_recurrence_nb(
            np.ascontiguousarray(F, dtype=np.float64),
            np.ascontiguousarray(e, dtype=np.float64),
            np.ascontiguousarray(y0, dtype=np.float64),
            int(every))

    def lagged_products_numba(X, lags):
        return _lagged_products_nb(
            np.ascontiguousarray(X, dtype=np.float64),
            np.asarray(lags, dtype=np.int64))

    linear_recurrence = linear_recurrence_numba
else:
    linear_recurrence = linear_recurrence_numpy
lagged_products = lagged_products_numpy
