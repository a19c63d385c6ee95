import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from colim import kernels

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba backend disabled")


def reference_recurrence(F, e, y0, every):
    y = y0.copy()
    kept = []
    for k in range(e.shape[0]):
        y = F @ y + e[k]
        if (k + 1) % every == 0:
            kept.append(y.copy())
    return np.array(kept), y


def reference_lagged(X, lags):
    N = X.shape[0]
    return np.array([sum(np.outer(X[t + k], X[t]) for t in range(N - k)) / (N - k) for k in lags])


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 7), st.integers(1, 40))
def test_recurrence_numpy_matches_loop(seed, d, every, blocks):
    rng = np.random.default_rng(seed)
    F = 0.9 * np.eye(d) + 0.05 * rng.standard_normal((d, d))
    e = rng.standard_normal((every * blocks, d))
    y0 = rng.standard_normal(d)
    kept, last = kernels.linear_recurrence_numpy(F, e, y0, every)
    rk, rl = reference_recurrence(F, e, y0, every)
    assert np.allclose(kept, rk, rtol=1e-11, atol=1e-11)
    assert np.allclose(last, rl, rtol=1e-11, atol=1e-11)


@needs_numba
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 10))
def test_recurrence_backends_agree(seed, d, every):
    rng = np.random.default_rng(seed)
    F = 0.95 * np.eye(d) + 0.02 * rng.standard_normal((d, d))
    e = rng.standard_normal((every * 500, d))
    y0 = rng.standard_normal(d)
    a = kernels.linear_recurrence_numpy(F, e, y0, every)
    b = kernels.linear_recurrence_numba(F, e, y0, every)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-10, atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(5, 60))
def test_lagged_numpy_matches_loop(seed, n, N):
    X = np.random.default_rng(seed).standard_normal((N, n))
    lags = [0, 1, min(3, N - 1)]
    assert np.allclose(kernels.lagged_products_numpy(X, lags), reference_lagged(X, lags), atol=1e-12)


@needs_numba
def test_lagged_backends_agree(rng):
    X = rng.standard_normal((5000, 4))
    lags = np.arange(5)
    assert np.allclose(kernels.lagged_products_numpy(X, lags),
                       kernels.lagged_products_numba(X, lags), atol=1e-13)


def test_env_flag_disables_numba():
    code = "from colim import kernels; print(kernels.BACKEND, kernels.linear_recurrence.__name__)"
    env = dict(os.environ, COLIM_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "linear_recurrence_numpy"]


@needs_numba
def test_simulation_identical_across_backends(monkeypatch):
    from colim import sde
    params = sde.SystemParams(np.array([[-1.0, 0.3], [-0.2, -0.7]]), np.eye(2), 0.1)
    cfg = sde.SimConfig(t1=50.0, seed=4)
    x_nb, _ = sde.simulate(params, cfg)
    monkeypatch.setattr(kernels, "linear_recurrence", kernels.linear_recurrence_numpy)
    x_np, _ = sde.simulate(params, cfg)
    assert np.allclose(x_nb.samples, x_np.samples, rtol=1e-9, atol=1e-10)
