"""Exact stationary statistics of the model class.

The colored system is linear on the joint state ``z = [x, eta]`` with drift
``M = [[A, sqrt(2Q)], [0, -I/tau]]`` and noise covariance ``D`` (``I/tau^2``
in the eta block). Its stationary covariance solves
``M Sigma + Sigma M^T + D = 0`` and ``<z(t+s) z(t)^T> = e^{Ms} Sigma`` for
``s >= 0``, so every quantity the estimators approximate is a block of a
matrix function of ``M`` applied to ``Sigma``. White noise is the same
construction with ``M = A`` and ``D = 2Q``.
"""
from dataclasses import dataclass

import numpy as np

from .corr import CorrSet, project_symmetry
from .linalg import eig_decompose, matrix_exp, resolvent, solve_sylvester_like
from .sde import SystemParams, augmented_drift


@dataclass(frozen=True)
class AugmentedSystem:
    params: SystemParams
    M: np.ndarray
    D: np.ndarray
    Sigma: np.ndarray

    @property
    def n(self):
        return self.params.n

    @property
    def C_xx(self):
        return self.Sigma[:self.n, :self.n]

    @property
    def C_xeta(self):
        """``<x eta^T>``; equals ``B sqrt(Q/2)``."""
        return self.Sigma[:self.n, self.n:]

    @property
    def C_etaeta(self):
        return self.Sigma[self.n:, self.n:]

    def lyapunov_residual(self):
        return float(np.linalg.norm(self.M @ self.Sigma + self.Sigma @ self.M.T + self.D))


def build_augmented(params):
    """Assemble ``M``, ``D`` and solve for the 2n x 2n stationary covariance."""
    if not params.colored:
        raise ValueError("build_augmented needs tau > 0; use build_white")
    n = params.n
    M = augmented_drift(params)
    D = np.zeros((2 * n, 2 * n))
    D[n:, n:] = np.eye(n) / params.tau ** 2
    Sigma = solve_sylvester_like(M, M.T, -D)
    return AugmentedSystem(params, M, D, 0.5 * (Sigma + Sigma.T))


def build_white(params):
    """Same container for the white-noise case: ``M = A``, ``D = 2Q``."""
    D = 2.0 * params.Q
    Sigma = solve_sylvester_like(params.A, params.A.T, -D)
    return AugmentedSystem(params, params.A.copy(), D, 0.5 * (Sigma + Sigma.T))


def build(params):
    return build_augmented(params) if params.colored else build_white(params)


def stationary_cov(params):
    """``K(0) = C_xx`` for either noise type."""
    return build(params).C_xx.copy()


def analytic_corr(aug, s):
    """Exact ``K(s)``; negative ``s`` uses ``K(-s) = K(s)^T``."""
    n = aug.n
    if s < 0:
        return analytic_corr(aug, -s).T
    return (matrix_exp(aug.M, s) @ aug.Sigma)[:n, :n]


def analytic_lagged(aug, dt, lags):
    """``{k: K(k dt)}`` computed by repeated multiplication with ``e^{M dt}``."""
    n = aug.n
    lags = sorted(int(k) for k in lags)
    F = matrix_exp(aug.M, dt)
    out = {}
    P = aug.Sigma.copy()
    k_prev = 0
    for k in lags:
        if k < 0:
            raise ValueError("lags must be non-negative")
        P = np.linalg.matrix_power(F, k - k_prev) @ P
        k_prev = k
        out[k] = P[:n, :n].copy()
    return out


def analytic_derivs(aug, dt=0.0, lags=()):
    """Exact ``K^(m)(0)`` as the x-blocks of ``M^m Sigma``, parity projected.

    Only meaningful for the colored system (the white ``K`` has a kink at 0).
    ``lags`` optionally fills ``CorrSet.lagged`` at spacing ``dt``.
    """
    n = aug.n
    mats = []
    P = aug.Sigma
    for m in range(4):
        mats.append(project_symmetry(P[:n, :n], "odd" if m % 2 else "even"))
        P = aug.M @ P
    lagged = analytic_lagged(aug, dt, lags) if len(lags) else {}
    return CorrSet(*mats, dt=float(dt), stencil_order=0, source="analytic",
                   lagged=lagged)


def effective_diffusion(A, Q, tau):
    """Effective diffusion ``S`` of the approximate Fokker-Planck equation.

    ``S[j, l] = sum_{k, m} p_m[l, k] Q[j, k] / (1 - tau lambda_m)`` with
    ``p_m[l, k] = U[l, m] U^{-1}[m, k]`` from ``A = U diag(lambda) U^{-1}``.
    Algebraically this is ``Q B^T``; the eigen route is kept as written so
    the identity can be checked.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    dec = eig_decompose(A)
    p = dec.projectors()
    w = 1.0 / (1.0 - tau * dec.values)
    S = np.einsum("mlk,jk,m->jl", p, Q.astype(complex), w)
    resid = np.linalg.norm(S.imag)
    if resid > 1e-8 * max(np.linalg.norm(S.real), 1.0):
        raise ValueError(f"effective diffusion has imaginary residue {resid:.3e}")
    return np.ascontiguousarray(S.real)


def approx_fdr_residual(A, C, S):
    """``||A C + C A^T + S + S^T||_F``."""
    return float(np.linalg.norm(A @ C + C @ A.T + S + S.T))


def ucna_1d(a, q, tau):
    """Effective drift and noise amplitude of the 1-d unified colored noise
    approximation: ``a / (1 - tau a)`` and ``sqrt(2q) / (1 - tau a)``."""
    a, q, tau = float(a), float(q), float(tau)
    if a >= 0 or q <= 0 or tau < 0:
        raise ValueError("need a < 0, q > 0, tau >= 0")
    den = 1.0 - tau * a
    return a / den, np.sqrt(2.0 * q) / den


def oracle_dump(params, dt=0.01, max_lag=3):
    """JSON-ready dictionary of the exact quantities for ``params``."""
    aug = build(params)
    out = {
        "params": params.to_dict(),
        "Sigma": aug.Sigma.tolist(),
        "lyapunov_residual": aug.lyapunov_residual(),
    }
    lags = range(max_lag + 1)
    if params.colored:
        out["corr"] = analytic_derivs(aug, dt, lags).to_dict()
        out["S"] = effective_diffusion(params.A, params.Q, params.tau).tolist()
        out["B"] = resolvent(params.A, params.tau).tolist()
    else:
        lagged = analytic_lagged(aug, dt, lags)
        out["corr"] = {"dt": dt, "source": "analytic", "K0": aug.C_xx.tolist(),
                       "lagged": {str(k): v.tolist() for k, v in lagged.items()}}
        out["S"] = params.Q.tolist()
    if params.n == 1:
        a_eff, q_eff = ucna_1d(params.A[0, 0], params.Q[0, 0], params.tau)
        out["ucna"] = {"a_eff": a_eff, "q_eff": q_eff}
    else:
        out["ucna"] = None
    return out
