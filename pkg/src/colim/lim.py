"""Classical linear inverse model and the lag-sweep consistency diagnostic."""
import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .corr import corr_lags
from .errors import ColimError, InsufficientDataError, SingularSystemError
from .linalg import condition_number, matrix_log_principal

DEFAULT_RHO = 0.5


@dataclass(frozen=True)
class LimResult:
    A_hat: np.ndarray
    Q_hat: np.ndarray
    rho: float
    warnings: List[str] = field(default_factory=list)

    def to_dict(self):
        return {"rho": self.rho, "A_hat": self.A_hat.tolist(),
                "Q_hat": self.Q_hat.tolist(), "warnings": list(self.warnings)}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def lim_from_corr(K0, Krho, rho):
    """LIM on given correlation matrices ``K(0)`` and ``K(rho)``.

    ``A = log(K(rho) K(0)^{-1}) / rho`` and ``Q = -(A K0 + K0 A^T) / 2``.
    """
    K0 = np.asarray(K0, dtype=float)
    Krho = np.asarray(Krho, dtype=float)
    if rho <= 0:
        raise ValueError("rho must be positive")
    cond = condition_number(K0)
    if cond > 1e14:
        raise SingularSystemError("K(0) is singular", cond)
    G = np.linalg.solve(K0.T, Krho.T).T
    A = matrix_log_principal(G) / rho
    Q = -0.5 * (A @ K0 + K0 @ A.T)
    Q = 0.5 * (Q + Q.T)
    warnings = []
    lam = np.linalg.eigvalsh(Q)
    if lam[0] < 0:
        warnings.append(f"Q_hat not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    if np.max(np.linalg.eigvals(A).real) >= 0:
        warnings.append("A_hat not stable")
    return LimResult(A, Q, float(rho), warnings)


def lim_estimate(ts, k=None, demean=True):
    """Algorithm of the classical LIM on a time series at lag index ``k``.

    ``k`` defaults to the lag closest to rho = 0.5.
    """
    if k is None:
        k = max(1, int(round(DEFAULT_RHO / ts.dt)))
    k = int(k)
    if k < 1:
        raise ValueError("lag index k must be >= 1")
    if k > len(ts) - 2:
        raise InsufficientDataError(f"lag {k} too large for {len(ts)} samples")
    K = corr_lags(ts, [0, k], demean)
    return lim_from_corr(K[0], K[1], k * ts.dt)


@dataclass(frozen=True)
class SweepEntry:
    rho: float
    A_hat: Optional[np.ndarray]
    error: Optional[str] = None

    @property
    def ok(self):
        return self.error is None


def sweep_from_lagged(K0, lagged, dt):
    """Run LIM at every ``{k: K(k dt)}`` entry; failures become error markers."""
    out = []
    for k in sorted(lagged):
        rho = k * dt
        try:
            res = lim_from_corr(K0, lagged[k], rho)
            out.append(SweepEntry(rho, res.A_hat))
        except (ColimError, np.linalg.LinAlgError) as exc:
            out.append(SweepEntry(rho, None, f"{type(exc).__name__}: {exc}"))
    return out


def lim_sweep(ts, k_min, k_max, demean=True):
    """LIM for every lag index in ``[k_min, k_max]``.

    On white-noise data ``A_hat`` should not depend on the lag; visible drift
    with the lag means the white-noise assumption is wrong.
    """
    k_min, k_max = int(k_min), int(k_max)
    if k_min < 1 or k_max < k_min:
        raise ValueError("need 1 <= k_min <= k_max")
    if k_max > len(ts) - 2:
        raise InsufficientDataError(f"k_max={k_max} too large for {len(ts)} samples")
    lags = [0] + list(range(k_min, k_max + 1))
    K = corr_lags(ts, lags, demean)
    return sweep_from_lagged(K[0], {k: K[i + 1] for i, k in enumerate(lags[1:])}, ts.dt)


def sweep_rows(entries):
    """Flatten sweep entries to CSV-ready dicts (``A_hat`` row-major)."""
    rows = []
    for e in entries:
        row = {"rho": e.rho, "error": e.error or ""}
        if e.ok:
            for (i, j), v in np.ndenumerate(e.A_hat):
                row[f"A_{i + 1}_{j + 1}"] = v
        rows.append(row)
    return rows
