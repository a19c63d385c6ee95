"""Empirical correlation function and its derivatives at lag zero."""
import json
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from . import kernels
from .errors import InsufficientDataError

# Central stencils written on positive lags only: the negative-lag value is
# always K(-kh) = K(kh)^T. Odd derivatives use sum_k w_k (K(kh) - K(-kh)),
# even ones w_0 K(0) + sum_k w_k (K(kh) + K(-kh)); the result is divided by
# h**m. Both sets are exact for polynomials up to degree m + order - 1.
STENCILS = {
    2: {
        1: {1: 1 / 2},
        2: {0: -2.0, 1: 1.0},
        3: {1: -1.0, 2: 1 / 2},
    },
    4: {
        1: {1: 8 / 12, 2: -1 / 12},
        2: {0: -30 / 12, 1: 16 / 12, 2: -1 / 12},
        3: {1: -13 / 8, 2: 8 / 8, 3: -1 / 8},
    },
}


def stencil_width(order):
    if order not in STENCILS:
        raise ValueError(f"stencil_order must be one of {sorted(STENCILS)}")
    return max(max(w) for w in STENCILS[order].values())


def project_symmetry(M, parity):
    """Symmetric (``"even"``) or skew-symmetric (``"odd"``) part of ``M``."""
    M = np.asarray(M, dtype=float)
    if parity == "even":
        return 0.5 * (M + M.T)
    if parity == "odd":
        return 0.5 * (M - M.T)
    raise ValueError("parity must be 'even' or 'odd'")


@dataclass(frozen=True)
class CorrSet:
    """``K^(m)(0)`` for m = 0..3 plus the lagged matrices they came from.

    Units of ``K_m`` are [x]^2 / time^m. ``lagged`` maps a non-negative lag
    index k to K(k dt).
    """

    K0: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    K3: np.ndarray
    dt: float = 0.0
    stencil_order: int = 0
    source: str = "empirical"
    lagged: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n(self):
        return self.K0.shape[0]

    def derivative(self, m):
        return (self.K0, self.K1, self.K2, self.K3)[m]

    def projected(self):
        """Copy with K0, K2 symmetric and K1, K3 skew."""
        return CorrSet(
            project_symmetry(self.K0, "even"), project_symmetry(self.K1, "odd"),
            project_symmetry(self.K2, "even"), project_symmetry(self.K3, "odd"),
            self.dt, self.stencil_order, self.source, dict(self.lagged))

    def to_dict(self):
        return {
            "dt": self.dt,
            "stencil_order": self.stencil_order,
            "source": self.source,
            "K0": self.K0.tolist(), "K1": self.K1.tolist(),
            "K2": self.K2.tolist(), "K3": self.K3.tolist(),
            "lagged": {str(k): v.tolist() for k, v in sorted(self.lagged.items())},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            *(np.asarray(d[f"K{m}"], float) for m in range(4)),
            dt=float(d.get("dt", 0.0)),
            stencil_order=int(d.get("stencil_order", 0)),
            source=d.get("source", "empirical"),
            lagged={int(k): np.asarray(v, float)
                    for k, v in d.get("lagged", {}).items()})

    def to_json(self):
        return json.dumps(self.to_dict(), default=_float17)


def _float17(x):
    return float(f"{x:.17g}")


def _prepare(ts, demean):
    X = np.asarray(ts.samples, dtype=float)
    if demean:
        X = X - X.mean(axis=0)
    return X


def corr_lags(ts, lags, demean=True):
    """``K(k dt)`` for every ``k`` in ``lags``; shape (len(lags), n, n).

    ``K(k dt) = sum_t x(t + k dt) x(t)^T / (N - k + 1)`` over the N + 1
    samples, after subtracting the sample mean when ``demean`` is set.
    """
    lags = np.asarray(lags, dtype=np.int64)
    if np.any(lags < 0) or np.any(lags > len(ts) - 2):
        raise InsufficientDataError(
            f"lags must lie in [0, {len(ts) - 2}] for {len(ts)} samples")
    return kernels.lagged_products(_prepare(ts, demean), lags)


def corr_at_lag(ts, k, demean=True):
    """Time-average estimate of ``<x(t + k dt) x(t)^T>``."""
    return corr_lags(ts, [int(k)], demean)[0]


def apply_stencils(lagged, dt, order=2):
    """Finite-difference derivatives at zero from a ``{k: K(k dt)}`` map.

    Returns the projected ``(K0, K1, K2, K3)``.
    """
    K = {k: np.asarray(v, dtype=float) for k, v in lagged.items()}
    out = [project_symmetry(K[0], "even")]
    for m in (1, 2, 3):
        acc = np.zeros_like(K[0])
        for k, w in STENCILS[order][m].items():
            if k == 0:
                acc += w * K[0]
            elif m % 2:
                acc += w * (K[k] - K[k].T)
            else:
                acc += w * (K[k] + K[k].T)
        out.append(project_symmetry(acc / dt ** m, "odd" if m % 2 else "even"))
    return tuple(out)


def estimate_derivatives(ts, stencil_order=2, demean=True):
    """Estimate ``K^(m)(0)``, m = 0..3, by central differences of the lagged
    correlation with step ``ts.dt``."""
    width = stencil_width(stencil_order)
    if len(ts) < width + 2:
        raise InsufficientDataError(
            f"need at least {width + 2} samples for stencil order {stencil_order}")
    lags = list(range(width + 1))
    Ks = corr_lags(ts, lags, demean)
    lagged = {k: Ks[i] for i, k in enumerate(lags)}
    K0, K1, K2, K3 = apply_stencils(lagged, ts.dt, stencil_order)
    return CorrSet(K0, K1, K2, K3, ts.dt, stencil_order, "empirical", lagged)
