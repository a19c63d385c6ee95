import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from colim import oracle
from colim.bench import gen_system
from colim.colored import (
    a_system,
    colored_lim_estimate,
    colored_lim_from_corr,
    default_q_method,
    eq2_residual,
    eq3_residual,
    kprime_raw,
    solve_A,
    solve_Q_fdr,
    solve_Q_kprime,
)
from colim.corr import CorrSet
from colim.errors import SingularSystemError
from colim.linalg import resolvent
from colim.sde import SimConfig, SystemParams, simulate


def relf(X, Y):
    return np.linalg.norm(X - Y) / np.linalg.norm(Y)


def truth_corr(A, Q, tau):
    return oracle.analytic_derivs(oracle.build(SystemParams(A, Q, tau)))


SCALAR = (np.array([[-1.0]]), np.array([[1.0]]), 0.05)


def test_scalar_solve_A_exact():
    c = truth_corr(*SCALAR)
    A, cond = solve_A(c, 0.05)
    assert A[0, 0] == pytest.approx(-1.0, rel=1e-12)
    assert A[0, 0] == 0.05 * c.K2[0, 0] / c.K0[0, 0]


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 2.0), st.floats(0.01, 10.0), st.floats(0.1, 5.0))
def test_scalar_solve_A_is_tau_k2_over_k0(seed, tau, k0, k2):
    c = CorrSet(np.array([[k0]]), np.zeros((1, 1)), np.array([[-k2]]), np.zeros((1, 1)))
    A, _ = solve_A(c, tau)
    assert A[0, 0] == pytest.approx(tau * -k2 / k0, rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
@pytest.mark.parametrize("tau", [0.1, 0.5])
def test_oracle_round_trip(n, tau):
    for seed in range(10):
        A, Q = gen_system(n, seed)
        c = truth_corr(A, Q, tau)
        for method in ("fdr", "kprime"):
            rep = colored_lim_from_corr(c, tau, method)
            assert relf(rep.A_hat, A) < 1e-8
            if rep.cond_Q < 20:
                assert relf(rep.Q_hat, Q) < 1e-8
            assert rep.residuals["eq2"] < 1e-10 * max(1.0, np.linalg.norm(c.K2))
            assert rep.residuals["eq3"] < 1e-10 * max(1.0, np.linalg.norm(c.K3))
        B = rep.B_hat
        assert np.abs((np.eye(n) - tau * rep.A_hat) @ B - np.eye(n)).max() < 1e-12
        assert np.array_equal(rep.Q_hat, rep.Q_hat.T)


def test_scalar_q_fdr():
    A, Q, tau = SCALAR
    K0 = np.array([[1 / 1.05]])
    Qh, cond = solve_Q_fdr(A, K0, tau)
    assert Qh[0, 0] == pytest.approx(1.0, rel=1e-13)
    assert cond == pytest.approx(1.0)


def test_q_fdr_tau_zero_is_classical(rng):
    from conftest import random_spd, random_stable
    A = random_stable(rng, 4)
    K0 = random_spd(rng, 4)
    Qh, _ = solve_Q_fdr(A, K0, 0.0)
    assert np.allclose(Qh, -0.5 * (A @ K0 + K0 @ A.T), atol=1e-12)


def test_q_fdr_tends_to_classical_linearly(rng):
    from conftest import random_spd, random_stable
    A = random_stable(rng, 3)
    K0 = random_spd(rng, 3)
    Qc = -0.5 * (A @ K0 + K0 @ A.T)
    errs = [np.linalg.norm(solve_Q_fdr(A, K0, t)[0] - Qc) for t in (1e-2, 1e-3, 1e-4)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 10) < 0.5)


def test_scalar_q_kprime():
    A, Q, tau = SCALAR
    assert solve_Q_kprime(A, np.array([[1 / 1.05]]), np.zeros((1, 1)), tau)[0, 0] == pytest.approx(1.0, rel=1e-13)


def test_kprime_zero_inputs():
    assert np.array_equal(solve_Q_kprime(np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)), 0.1), np.zeros((2, 2)))


@pytest.mark.parametrize("n", [2, 4, 6])
def test_kprime_asymmetry_small_at_truth(n):
    A, Q = gen_system(n, 3)
    c = truth_corr(A, Q, 0.1)
    Qr = kprime_raw(A, c.K0, c.K1, 0.1)
    assert np.linalg.norm(Qr - Qr.T) < 1e-10 * max(1.0, np.linalg.norm(Q))
    assert relf(0.5 * (Qr + Qr.T), Q) < 1e-8


@pytest.mark.parametrize("n", [2, 3, 5])
def test_fdr_and_kprime_agree_at_truth(n):
    A, Q = gen_system(n, 11)
    c = truth_corr(A, Q, 0.1)
    Qa, _ = solve_Q_fdr(A, c.K0, 0.1)
    Qb = solve_Q_kprime(A, c.K0, c.K1, 0.1)
    assert np.linalg.norm(Qa - Qb) < 1e-8 * np.linalg.norm(Q)


def test_least_squares_residual_is_optimal(rng):
    # perturbed inputs: the returned A minimises the stacked residual
    A, Q = gen_system(3, 5)
    c = truth_corr(A, Q, 0.1)
    noisy = CorrSet(*(c.derivative(m) + 0.01 * rng.standard_normal((3, 3)) for m in range(4))).projected()
    Ah, _ = solve_A(noisy, 0.1)
    M, b = a_system(noisy, 0.1)
    best = np.linalg.norm(M @ Ah.ravel() - b)
    for _ in range(20):
        trial = Ah + 1e-3 * rng.standard_normal((3, 3))
        assert np.linalg.norm(M @ trial.ravel() - b) >= best
    r2 = eq2_residual(Ah, 0.1, noisy.K0, noisy.K1, noisy.K2)
    r3 = eq3_residual(Ah, 0.1, noisy.K0, noisy.K1, noisy.K2, noisy.K3)
    assert np.hypot(r2, r3) == pytest.approx(best, rel=1e-9)


def test_eq3_block_can_be_dropped():
    A = -np.array([[2.0, 0.3], [0.3, 1.0]])  # negative definite
    c = truth_corr(A, np.eye(2), 0.1)
    Ah, _ = solve_A(c, 0.1, use_eq3=False)
    assert relf(Ah, A) < 1e-9


def test_rank_deficient_system():
    c = CorrSet(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(SingularSystemError) as exc:
        solve_A(c, 0.1)
    assert exc.value.cond > 1e12


def test_tau_must_be_positive():
    with pytest.raises(ValueError):
        solve_A(truth_corr(*SCALAR), 0.0)


def test_default_q_method():
    assert default_q_method(6, 0.5) == "fdr"
    assert default_q_method(7, 0.1) == "fdr"
    assert default_q_method(7, 0.5) == "kprime"
    assert default_q_method(3, 0.1) == "fdr"


def test_simulated_scalar_estimate():
    A, Q, tau = SCALAR
    x, _ = simulate(SystemParams(A, Q, tau), SimConfig(t1=1000.0, seed=21))
    rep = colored_lim_estimate(x, tau)
    assert rep.A_hat[0, 0] == pytest.approx(-1.0, rel=0.10)
    assert rep.Q_hat[0, 0] == pytest.approx(1.0, rel=0.10)
    assert rep.q_method == "fdr"
    assert np.abs(rep.B_hat - resolvent(rep.A_hat, tau)).max() < 1e-12


def test_warnings_for_bad_inputs():
    # K2 > 0 in 1-d forces A_hat > 0 and a negative Q_hat
    c = CorrSet(np.array([[1.0]]), np.zeros((1, 1)), np.array([[2.0]]), np.zeros((1, 1)))
    rep = colored_lim_from_corr(c, 0.1)
    assert any("not stable" in w for w in rep.warnings)
    assert any("not positive semidefinite" in w for w in rep.warnings)


def test_report_json():
    rep = colored_lim_from_corr(truth_corr(*SCALAR), 0.05, "kprime")
    d = json.loads(rep.to_json())
    assert {"A_hat", "Q_hat", "B_hat", "tau", "q_method", "cond_A", "cond_Q", "residuals", "warnings"} <= set(d)
    assert d["q_method"] == "kprime" and "kprime_asymmetry" in d["residuals"]
