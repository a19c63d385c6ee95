"""Dense matrix primitives and the structured linear solvers.

Everything here works on small dense ``float64`` arrays (n up to ~12) and is
a pure function of its inputs.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    BranchCutError,
    DecompositionError,
    NotPositiveDefiniteError,
    ShapeError,
    SingularSystemError,
)

__all__ = [
    "EigenDecomposition",
    "as_matrix",
    "as_square",
    "check_spd",
    "check_stable",
    "condition_number",
    "eig_decompose",
    "is_stable",
    "matrix_exp",
    "matrix_log_principal",
    "matrix_sqrt_spd",
    "resolvent",
    "solve_sylvester_like",
    "solve_symmetric_unknown",
]

# eigenvector matrices worse than this are treated as defective
DEFECTIVE_COND = 1e12
# Kronecker systems beyond this are reported as singular
SINGULAR_COND = 1e14


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-d float array, promoting scalars to 1x1."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-d array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ShapeError(f"{name} contains non-finite entries")
    return M


def as_square(M, name="matrix"):
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {M.shape}")
    return M


def check_spd(Q, name="Q", allow_semidefinite=False, rtol=1e-12):
    """Validate that ``Q`` is symmetric and positive (semi)definite.

    Symmetry is checked to ``rtol`` relative to the largest entry; the
    returned matrix is the exact symmetric part.
    """
    Q = as_square(Q, name)
    scale = max(np.max(np.abs(Q)), np.finfo(float).tiny)
    if np.max(np.abs(Q - Q.T)) > rtol * scale:
        raise NotPositiveDefiniteError(f"{name} is not symmetric")
    Q = 0.5 * (Q + Q.T)
    lam = np.linalg.eigvalsh(Q)
    if allow_semidefinite:
        if lam[0] < -1e-12 * max(abs(lam[-1]), 1.0):
            raise NotPositiveDefiniteError(
                f"{name} has a negative eigenvalue {lam[0]:.3e}")
    elif lam[0] <= 0:
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite (min eigenvalue {lam[0]:.3e})")
    return Q


def is_stable(A):
    return bool(np.max(np.linalg.eigvals(as_square(A)).real) < 0)


def check_stable(A, name="A"):
    A = as_square(A, name)
    lam = np.linalg.eigvals(A)
    if np.max(lam.real) >= 0:
        raise ValueError(
            f"{name} is not stable (max real eigenvalue {np.max(lam.real):.3e})")
    return A


@dataclass(frozen=True)
class EigenDecomposition:
    """``M = vectors @ diag(values) @ inverse`` in complex arithmetic."""

    values: np.ndarray
    vectors: np.ndarray
    inverse: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ self.inverse

    def projectors(self):
        """Return ``p[m, l, k] = vectors[l, m] * inverse[m, k]``.

        Summing over ``m`` gives the identity.
        """
        return np.einsum("lm,mk->mlk", self.vectors, self.inverse)


def eig_decompose(M, max_cond=DEFECTIVE_COND):
    """Complex eigendecomposition with a defectiveness guard.

    Raises
    ------
    DecompositionError
        If the eigenvector matrix has condition number above ``max_cond`` or
        the factorisation does not reproduce ``M`` to 1e-10 relative Frobenius.
    """
    M = as_square(M)
    w, V = np.linalg.eig(M)
    V = V.astype(complex)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > max_cond:
        raise DecompositionError(
            f"eigenvector matrix condition {cond:.3e} exceeds {max_cond:.1e}; "
            "matrix is (nearly) defective")
    Vinv = np.linalg.inv(V)
    dec = EigenDecomposition(w.astype(complex), V, Vinv)
    err = np.linalg.norm(dec.reconstruct() - M)
    if err > 1e-10 * max(np.linalg.norm(M), 1.0):
        raise DecompositionError(f"eigendecomposition residual {err:.3e} too large")
    return dec


def matrix_exp(M, t=1.0):
    """Return ``exp(M t)`` (scaling and squaring with a Pade core)."""
    M = as_square(M, "M")
    return sla.expm(M * float(t))


def matrix_log_principal(M):
    """Principal matrix logarithm of a real, diagonalizable matrix.

    The logarithm is taken eigenvalue by eigenvalue on the principal branch,
    reconstructed in complex arithmetic and the (round-off sized) imaginary
    part dropped.

    Raises
    ------
    BranchCutError
        An eigenvalue is zero or lies on the closed negative real axis.
    DecompositionError
        The matrix is defective, or the reconstruction is not real.
    """
    M = as_square(M, "M")
    dec = eig_decompose(M)
    lam = dec.values
    scale = np.maximum(np.abs(lam), 1.0)
    on_cut = (np.abs(lam.imag) <= 1e-12 * scale) & (lam.real <= 0)
    if np.any(on_cut) or np.any(lam == 0):
        bad = lam[on_cut | (lam == 0)]
        raise BranchCutError(
            f"eigenvalue(s) {bad} on the branch cut of the principal logarithm")
    L = (dec.vectors * np.log(lam)) @ dec.inverse
    resid = np.linalg.norm(L.imag)
    if resid > 1e-8 * max(np.linalg.norm(L.real), 1.0):
        raise DecompositionError(f"logarithm has imaginary residue {resid:.3e}")
    return np.ascontiguousarray(L.real)


def matrix_sqrt_spd(Q):
    """Symmetric square root of a symmetric positive semidefinite matrix."""
    Q = check_spd(Q, "Q", allow_semidefinite=True)
    lam, V = np.linalg.eigh(Q)
    S = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    return 0.5 * (S + S.T)


def condition_number(M):
    """2-norm condition number; ``inf`` for a singular matrix."""
    s = np.linalg.svd(as_matrix(M), compute_uv=False)
    if s[-1] == 0 or not np.isfinite(s[-1]):
        return float("inf")
    return float(s[0] / s[-1])


def _kron_operator(L, R):
    # row-major vec: vec(L X) = (L kron I) vec(X), vec(X R) = (I kron R^T) vec(X)
    n, m = L.shape[0], R.shape[0]
    return np.kron(L, np.eye(m)) + np.kron(np.eye(n), R.T)


def solve_sylvester_like(coeffL, coeffR, rhs):
    """Solve ``coeffL @ X + X @ coeffR = rhs`` by Kronecker vectorization.

    With ``coeffL = A`` and ``coeffR = A.T`` this is the continuous Lyapunov
    equation.

    Raises
    ------
    SingularSystemError
        If the vectorized operator is singular to working precision.
    """
    L = as_square(coeffL, "coeffL")
    R = as_square(coeffR, "coeffR")
    rhs = as_matrix(rhs, "rhs")
    if rhs.shape != (L.shape[0], R.shape[0]):
        raise ShapeError(f"rhs shape {rhs.shape} incompatible with coefficients")
    K = _kron_operator(L, R)
    cond = condition_number(K)
    if cond > SINGULAR_COND:
        raise SingularSystemError("Sylvester operator is singular", cond)
    X = np.linalg.solve(K, rhs.ravel()).reshape(rhs.shape)
    return X


def _symmetric_basis(n):
    iu, ju = np.triu_indices(n)
    return iu, ju


def symmetric_operator(coeff):
    """Matrix of ``Q -> Q coeff^T + coeff Q`` restricted to symmetric ``Q``.

    Columns are indexed by the upper-triangle unknowns ``Q[i, j], i <= j``
    and rows by the upper-triangle entries of the (symmetric) image.
    """
    C = as_square(coeff, "coeff")
    n = C.shape[0]
    iu, ju = _symmetric_basis(n)
    p = len(iu)
    Mred = np.empty((p, p))
    for col, (i, j) in enumerate(zip(iu, ju)):
        E = np.zeros((n, n))
        E[i, j] = 1.0
        E[j, i] = 1.0
        img = E @ C.T + C @ E
        Mred[:, col] = img[iu, ju]
    return Mred


def solve_symmetric_unknown(coeff, rhs):
    """Solve ``Q coeff^T + coeff Q = rhs`` for a symmetric ``Q``.

    The unknowns are the n(n+1)/2 upper-triangle entries of ``Q``; the
    equations are the upper-triangle entries of the symmetrized ``rhs``.
    A minimum-norm least-squares solution is returned, so rank-deficient
    systems still produce an answer.

    Returns
    -------
    Q : ndarray
        Exactly symmetric solution.
    cond : float
        2-norm condition number of the reduced n(n+1)/2 system. Callers
        compare it against their own threshold; it is never fatal here.
    """
    C = as_square(coeff, "coeff")
    rhs = as_square(rhs, "rhs")
    n = C.shape[0]
    if rhs.shape != (n, n):
        raise ShapeError(f"rhs shape {rhs.shape} incompatible with coeff {C.shape}")
    rhs = 0.5 * (rhs + rhs.T)
    iu, ju = _symmetric_basis(n)
    Mred = symmetric_operator(C)
    q, *_ = np.linalg.lstsq(Mred, rhs[iu, ju], rcond=None)
    Q = np.zeros((n, n))
    Q[iu, ju] = q
    Q[ju, iu] = q
    return Q, condition_number(Mred)


def resolvent(A, tau):
    """Return ``(I - tau A)^{-1}``; the identity when ``tau == 0``."""
    A = as_square(A, "A")
    tau = float(tau)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    n = A.shape[0]
    if tau == 0:
        return np.eye(n)
    M = np.eye(n) - tau * A
    cond = condition_number(M)
    if cond > SINGULAR_COND:
        raise SingularSystemError("I - tau*A is singular", cond)
    return np.linalg.solve(M, np.eye(n))
