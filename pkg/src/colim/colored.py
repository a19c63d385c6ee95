"""Colored-noise linear inverse model.

For ``dx/dt = A x + sqrt(2Q) eta`` with Ornstein-Uhlenbeck noise ``eta`` of
known correlation time ``tau``, the derivatives of the stationary correlation
``K(s) = <x(t+s) x(t)^T>`` at ``s = 0`` satisfy (with ``B = (I - tau A)^-1``
and ``C = K(0)``)::

    0      = A C + C A^T + Q B^T + B Q                      (fdr)
    K'(0)  = A C + Q B^T             (before skew projection) (kprime)
    K''(0) = (A X + X^T A^T) / 2,    X = K'(0) + C / tau      (eq2)
    K'''(0) - K'(0)/tau^2 = (A Y - Y A^T) / 2,
                                     Y = K''(0) - C / tau^2   (eq3)

``A`` comes from eq2 and eq3 (linear in ``A``, stacked and solved by least
squares), then ``Q`` from either fdr or kprime.
"""
import json
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .corr import estimate_derivatives
from .errors import SingularSystemError
from .linalg import condition_number, resolvent, solve_symmetric_unknown

Q_METHODS = ("fdr", "kprime")
COND_Q_THRESHOLD = 20.0
# the stacked A-system is treated as rank deficient beyond this
COND_A_MAX = 1e12


@dataclass(frozen=True)
class EstimationReport:
    A_hat: np.ndarray
    Q_hat: np.ndarray
    B_hat: np.ndarray
    tau: float
    q_method: str
    cond_A: float
    cond_Q: float
    residuals: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "A_hat": self.A_hat.tolist(),
            "Q_hat": self.Q_hat.tolist(),
            "B_hat": self.B_hat.tolist(),
            "tau": self.tau,
            "q_method": self.q_method,
            "cond_A": _jsonable(self.cond_A),
            "cond_Q": _jsonable(self.cond_Q),
            "residuals": {k: _jsonable(v) for k, v in self.residuals.items()},
            "warnings": list(self.warnings),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(x):
    x = float(x)
    return x if np.isfinite(x) else str(x)


def default_q_method(n, tau):
    """``kprime`` only for n >= 7 at tau >= 0.5, where the n(n+1)/2 system
    behind ``fdr`` tends to be ill-conditioned; ``fdr`` otherwise."""
    return "kprime" if (n >= 7 and tau >= 0.5) else "fdr"


# ------------------------------------------------------------------ identities

def fdr_residual(A, Q, tau, C):
    """Frobenius norm of ``A C + C A^T + Q B^T + B Q``."""
    B = resolvent(A, tau)
    return float(np.linalg.norm(A @ C + C @ A.T + Q @ B.T + B @ Q))


def kprime_residual(A, Q, tau, C, K1):
    """Residual of the skew-projected first-derivative identity."""
    B = resolvent(A, tau)
    rhs = 0.5 * (A @ C - C @ A.T + Q @ B.T - B @ Q)
    return float(np.linalg.norm(K1 - rhs))


def eq2_residual(A, tau, K0, K1, K2):
    X = K1 + K0 / tau
    return float(np.linalg.norm(K2 - 0.5 * (A @ X + X.T @ A.T)))


def eq3_residual(A, tau, K0, K1, K2, K3):
    Y = K2 - K0 / tau ** 2
    return float(np.linalg.norm(K3 - K1 / tau ** 2 - 0.5 * (A @ Y - Y @ A.T)))


# -------------------------------------------------------------------- solvers

def a_system(corr, tau, use_eq3=True):
    """Stacked linear system ``M a = b`` for the entries of ``A``.

    With ``use_eq3`` the unknowns are all n^2 entries (row-major). Without
    it only the upper triangle of a symmetric ``A`` is unknown and only the
    upper-triangle equations of the (symmetric) second-derivative identity
    are kept, which makes the system square.
    """
    K0, K1, K2, K3 = corr.K0, corr.K1, corr.K2, corr.K3
    n = K0.shape[0]
    X = K1 + K0 / tau
    Y = K2 - K0 / tau ** 2
    if not use_eq3:
        iu, ju = np.triu_indices(n)
        M = np.empty((len(iu), len(iu)))
        for col, (i, j) in enumerate(zip(iu, ju)):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            M[:, col] = (0.5 * (E @ X + X.T @ E.T))[iu, ju]
        return M, K2[iu, ju]
    blocks = [np.empty((n * n, n * n)), np.empty((n * n, n * n))]
    rhs = [K2.ravel(), (K3 - K1 / tau ** 2).ravel()]
    for col in range(n * n):
        E = np.zeros((n, n))
        E.flat[col] = 1.0
        blocks[0][:, col] = (0.5 * (E @ X + X.T @ E.T)).ravel()
        blocks[1][:, col] = (0.5 * (E @ Y - Y @ E.T)).ravel()
    return np.vstack(blocks), np.concatenate(rhs)


def solve_A(corr, tau, use_eq3=True):
    """Dynamical matrix from the second and third derivative identities.

    Parameters
    ----------
    corr : CorrSet
        Needs ``K0`` .. ``K3``.
    tau : float
        Noise correlation time, > 0.
    use_eq3 : bool
        Set to False only when ``A`` is known to be symmetric negative
        definite; ``A`` is then solved as a symmetric matrix from the
        second-derivative identity alone.

    Returns
    -------
    A : ndarray
    cond : float
        2-norm condition number of the linear system.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    n = corr.K0.shape[0]
    M, b = a_system(corr, tau, use_eq3)
    cond = condition_number(M)
    if cond > COND_A_MAX:
        raise SingularSystemError("stacked A-system is rank deficient", cond)
    a, *_ = np.linalg.lstsq(M, b, rcond=None)
    if use_eq3:
        return a.reshape(n, n), cond
    A = np.zeros((n, n))
    iu, ju = np.triu_indices(n)
    A[iu, ju] = a
    A[ju, iu] = a
    return A, cond


def solve_Q_fdr(A_hat, K0, tau):
    """Diffusion matrix from the generalized fluctuation-dissipation relation.

    Solves ``Q B^T + B Q = -(A K0 + K0 A^T)`` over symmetric ``Q``.
    Returns ``(Q, cond)`` with ``cond`` that of the n(n+1)/2 system.
    """
    B = resolvent(A_hat, tau)
    return solve_symmetric_unknown(B, -(A_hat @ K0 + K0 @ A_hat.T))


def kprime_raw(A_hat, K0, K1, tau):
    """Unsymmetrized ``(K1 - A K0) B^{-T}``."""
    B = resolvent(A_hat, tau)
    return np.linalg.solve(B, (K1 - A_hat @ K0).T).T


def solve_Q_kprime(A_hat, K0, K1, tau):
    """Diffusion matrix from ``K'(0) = A C + Q B^T``, symmetrized."""
    Qr = kprime_raw(A_hat, K0, K1, tau)
    return 0.5 * (Qr + Qr.T)


def colored_lim_from_corr(corr, tau, q_method="auto", use_eq3=True,
                          cond_threshold=COND_Q_THRESHOLD):
    """Colored-LIM on a ready-made :class:`~colim.corr.CorrSet`."""
    corr = corr.projected()
    n = corr.n
    tau = float(tau)
    if q_method in (None, "auto"):
        q_method = default_q_method(n, tau)
    if q_method not in Q_METHODS:
        raise ValueError(f"q_method must be one of {Q_METHODS} or 'auto'")
    warnings = []
    A, cond_A = solve_A(corr, tau, use_eq3)
    if np.max(np.linalg.eigvals(A).real) >= 0:
        warnings.append("A_hat not stable")
    B = resolvent(A, tau)
    residuals = {}
    if q_method == "fdr":
        Q, cond_Q = solve_Q_fdr(A, corr.K0, tau)
    else:
        Qr = kprime_raw(A, corr.K0, corr.K1, tau)
        Q = 0.5 * (Qr + Qr.T)
        # the kprime route solves an n x n system with coefficient B^T
        cond_Q = condition_number(B)
        asym = float(np.linalg.norm(0.5 * (Qr - Qr.T)))
        residuals["kprime_asymmetry"] = asym
        warnings.append(f"kprime asymmetry norm {asym:.3e}")
    lam = np.linalg.eigvalsh(Q)
    if lam[0] < 0:
        warnings.append(f"Q_hat not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    if cond_Q > cond_threshold:
        warnings.append(f"cond_Q {cond_Q:.3g} exceeds {cond_threshold:g}")
    residuals["fdr"] = fdr_residual(A, Q, tau, corr.K0)
    residuals["kprime"] = kprime_residual(A, Q, tau, corr.K0, corr.K1)
    residuals["eq2"] = eq2_residual(A, tau, corr.K0, corr.K1, corr.K2)
    residuals["eq3"] = eq3_residual(A, tau, corr.K0, corr.K1, corr.K2, corr.K3)
    return EstimationReport(A, Q, B, tau, q_method, cond_A, cond_Q, residuals, warnings)


def colored_lim_estimate(ts, tau, q_method="auto", stencil_order=2, demean=True,
                         use_eq3=True, cond_threshold=COND_Q_THRESHOLD):
    """Colored-LIM end to end on an observed series.

    ``tau`` must be known in advance; it is not estimated.
    """
    corr = estimate_derivatives(ts, stencil_order, demean)
    return colored_lim_from_corr(corr, tau, q_method, use_eq3, cond_threshold)
