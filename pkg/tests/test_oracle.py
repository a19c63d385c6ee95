import json

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from colim import oracle
from colim.colored import eq2_residual, eq3_residual, fdr_residual, kprime_residual
from colim.corr import corr_at_lag
from colim.linalg import matrix_exp, matrix_sqrt_spd, resolvent
from colim.sde import SimConfig, SystemParams, simulate

from conftest import random_spd, random_stable

SCALAR = SystemParams(np.array([[-1.0]]), np.array([[1.0]]), 0.05)


def random_params(seed, n, tau):
    rng = np.random.default_rng(seed)
    return SystemParams(random_stable(rng, n), random_spd(rng, n), tau)


def test_scalar_sigma():
    aug = oracle.build_augmented(SCALAR)
    assert np.allclose(aug.Sigma, [[1 / 1.05, np.sqrt(0.5) / 1.05], [np.sqrt(0.5) / 1.05, 10.0]], atol=1e-12)
    assert np.allclose(aug.Sigma, [[0.952381, 0.673435], [0.673435, 10.0]], atol=1e-6)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.sampled_from([0.05, 0.1, 0.5]))
def test_augmented_invariants(seed, n, tau):
    p = random_params(seed, n, tau)
    aug = oracle.build_augmented(p)
    # independent Lyapunov solver (Bartels-Stewart)
    ref = sla.solve_continuous_lyapunov(aug.M, -aug.D)
    assert np.linalg.norm(aug.Sigma - ref) < 1e-9 * np.linalg.norm(ref)
    assert aug.lyapunov_residual() < 1e-10 * max(1.0, np.linalg.norm(aug.D))
    assert np.abs(aug.C_etaeta - np.eye(n) / (2 * tau)).max() < 1e-10 * max(1.0, 1 / tau)
    assert np.linalg.eigvalsh(aug.Sigma)[0] > -1e-10
    B = resolvent(p.A, tau)
    S2 = matrix_sqrt_spd(p.Q / 2)
    assert np.abs(aug.C_xeta - B @ S2).max() < 1e-9 * max(1.0, np.abs(B @ S2).max())
    # C_xx from the generalized FDR as a second, independent route
    C = sla.solve_continuous_lyapunov(p.A, -(p.Q @ B.T + B @ p.Q))
    assert np.linalg.norm(aug.C_xx - C) < 1e-9 * np.linalg.norm(C)


def test_build_white_needs_no_tau():
    p = random_params(1, 3, 0.0)
    aug = oracle.build(p)
    assert aug.M.shape == (3, 3)
    with pytest.raises(ValueError):
        oracle.build_augmented(p)


def test_analytic_corr_at_zero_and_negative_lag():
    p = random_params(2, 3, 0.1)
    aug = oracle.build(p)
    assert np.array_equal(oracle.analytic_corr(aug, 0.0), aug.C_xx)
    s = 0.37
    via_right = (aug.Sigma @ matrix_exp(aug.M.T, s))[:3, :3]
    assert np.allclose(oracle.analytic_corr(aug, -s), via_right, atol=1e-12)
    assert np.allclose(oracle.analytic_corr(aug, s).T, via_right, atol=1e-12)


def test_white_corr_is_exponential():
    p = random_params(3, 3, 0.0)
    aug = oracle.build(p)
    for s in (0.1, 0.5, 2.0):
        assert np.allclose(oracle.analytic_corr(aug, s), matrix_exp(p.A, s) @ aug.C_xx, atol=1e-12)


def test_analytic_lagged_matches_pointwise():
    aug = oracle.build(random_params(4, 2, 0.2))
    lagged = oracle.analytic_lagged(aug, 0.05, [0, 3, 7])
    for k, K in lagged.items():
        assert np.allclose(K, oracle.analytic_corr(aug, 0.05 * k), atol=1e-12)


def test_smoothness_contrast():
    col = oracle.build(SCALAR)
    wht = oracle.build(SystemParams(SCALAR.A, SCALAR.Q))
    q_col, q_wht = [], []
    for h in (1e-2, 1e-3, 1e-4):
        q_col.append((oracle.analytic_corr(col, h) - col.C_xx)[0, 0] / h)
        q_wht.append((oracle.analytic_corr(wht, h) - wht.C_xx)[0, 0] / h)
    assert abs(q_col[-1]) < 1e-2 and abs(q_col[-1]) < abs(q_col[0]) / 50
    assert q_wht[-1] == pytest.approx((SCALAR.A @ wht.C_xx)[0, 0], rel=1e-3)


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("tau", [0.05, 0.1, 0.5])
def test_identities_hold_at_oracle(n, tau):
    for seed in range(5):
        p = random_params(seed, n, tau)
        c = oracle.analytic_derivs(oracle.build(p))
        A, Q = p.A, p.Q
        assert fdr_residual(A, Q, tau, c.K0) < 1e-10 * max(1.0, np.linalg.norm(c.K0))
        assert kprime_residual(A, Q, tau, c.K0, c.K1) < 1e-10 * max(1.0, np.linalg.norm(c.K1))
        assert eq2_residual(A, tau, c.K0, c.K1, c.K2) < 1e-10 * max(1.0, np.linalg.norm(c.K2))
        assert eq3_residual(A, tau, c.K0, c.K1, c.K2, c.K3) < 1e-10 * max(1.0, np.linalg.norm(c.K3))


def test_scalar_derivatives():
    c = oracle.analytic_derivs(oracle.build(SCALAR))
    assert c.K1[0, 0] == 0.0 and c.K3[0, 0] == 0.0
    assert c.K2[0, 0] / c.K0[0, 0] == pytest.approx(-20.0, rel=1e-12)
    assert c.source == "analytic"


def test_matches_long_simulation():
    p = SystemParams(np.array([[-1.0, 0.5], [-0.5, -1.5]]), np.eye(2), 0.1)
    aug = oracle.build(p)
    x, _ = simulate(p, SimConfig(t1=5000.0, seed=9))
    for k in (0, 25, 50, 100):
        K = corr_at_lag(x, k)
        ref = oracle.analytic_corr(aug, k * x.dt)
        assert np.linalg.norm(K - ref) < 0.10 * np.linalg.norm(aug.C_xx)


# -------------------------------------------------------------- appendix formulas

def test_effective_diffusion_tau_zero(rng):
    A, Q = random_stable(rng, 4), random_spd(rng, 4)
    assert np.allclose(oracle.effective_diffusion(A, Q, 0.0), Q, atol=1e-12)


def test_effective_diffusion_scalar():
    assert oracle.effective_diffusion([[-1.0]], [[1.0]], 0.05)[0, 0] == pytest.approx(1 / 1.05, rel=1e-13)


def test_effective_diffusion_symmetric_a(rng):
    R = rng.standard_normal((4, 4))
    A = -(R @ R.T + 0.5 * np.eye(4))
    Q = random_spd(rng, 4)
    B = resolvent(A, 0.2)
    S = oracle.effective_diffusion(A, Q, 0.2)
    assert np.allclose(S, Q @ B, atol=1e-12)
    # C from the generalized FDR satisfies the approximate relation too
    C = sla.solve_continuous_lyapunov(A, -(Q @ B.T + B @ Q))
    assert oracle.approx_fdr_residual(A, C, S) < 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.sampled_from([0.05, 0.1, 0.5]))
def test_effective_diffusion_is_q_times_b_transpose(seed, n, tau):
    # sum_m p_m / (1 - tau lambda_m) is the spectral form of B, so S = Q B^T
    # for every diagonalizable A, symmetric or not
    p = random_params(seed, n, tau)
    S = oracle.effective_diffusion(p.A, p.Q, tau)
    assert np.allclose(S, p.Q @ resolvent(p.A, tau).T, atol=1e-10 * max(1.0, np.abs(S).max()))
    C = oracle.build(p).C_xx
    assert oracle.approx_fdr_residual(p.A, C, S) < 1e-9 * max(1.0, np.linalg.norm(C))


def test_effective_diffusion_linear_in_tau(rng):
    A, Q = random_stable(rng, 3), random_spd(rng, 3)
    d = [np.linalg.norm(oracle.effective_diffusion(A, Q, t) - Q) for t in (1e-1, 1e-2, 1e-3)]
    assert 8 < d[0] / d[1] < 12 and 9 < d[1] / d[2] < 11


def test_approx_fdr_symmetric_construction(rng):
    A, C = random_stable(rng, 3), random_spd(rng, 3)
    S = -(A @ C + C @ A.T) / 2
    assert oracle.approx_fdr_residual(A, C, S) < 1e-14


def test_ucna():
    a, q = oracle.ucna_1d(-1.0, 1.0, 0.05)
    assert a == pytest.approx(-1 / 1.05, rel=1e-14)
    assert q == pytest.approx(np.sqrt(2) / 1.05, rel=1e-14)
    assert q == pytest.approx(1.34687006, abs=1e-8)
    a0, q0 = oracle.ucna_1d(-0.7, 0.3, 0.0)
    assert a0 == -0.7 and q0 == pytest.approx(np.sqrt(0.6))
    with pytest.raises(ValueError):
        oracle.ucna_1d(0.5, 1.0, 0.1)


def test_oracle_dump_json():
    d = json.loads(json.dumps(oracle.oracle_dump(SCALAR)))
    assert d["ucna"]["a_eff"] == pytest.approx(-0.952381, abs=1e-6)
    assert d["corr"]["K2"][0][0] / d["corr"]["K0"][0][0] == pytest.approx(-20.0)
    assert sorted(d["corr"]["lagged"]) == ["0", "1", "2", "3"]
    w = oracle.oracle_dump(random_params(0, 2, 0.0))
    assert w["ucna"] is None and "K0" in w["corr"]
