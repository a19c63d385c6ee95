"""Trajectory generation for white- and colored-noise driven linear SDEs.

White noise::

    dx = A x dt + sqrt(2Q) dW

Colored (Ornstein-Uhlenbeck) noise, simulated on the augmented state
``z = [x, eta]``::

    dx   = (A x + sqrt(2Q) eta) dt
    deta = -eta / tau dt + dW / tau

Both integrators reduce to a linear recurrence ``z' = F z + G w`` with
Gaussian ``w``; the recurrence itself runs in :mod:`colim.kernels`.
"""
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import InsufficientDataError, SimulationError
from .linalg import (
    as_square,
    check_spd,
    check_stable,
    matrix_exp,
    matrix_sqrt_spd,
    solve_sylvester_like,
)

SCHEMES = ("heun2", "exact_exponential")
# steps per noise block; a multiple of any sane subsample factor is enforced below
_BLOCK = 1 << 15


@dataclass(frozen=True)
class SystemParams:
    """Ground truth ``(A, Q, tau)``; ``tau == 0`` means white noise.

    ``Q`` may be positive semidefinite (``Q = 0`` gives a deterministic
    system), but estimators assume it is definite.
    """

    A: np.ndarray
    Q: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        A = check_stable(as_square(self.A, "A"))
        Q = check_spd(self.Q, "Q", allow_semidefinite=True, rtol=1e-10)
        if Q.shape != A.shape:
            raise ValueError(f"A {A.shape} and Q {Q.shape} differ in shape")
        tau = float(self.tau)
        if not np.isfinite(tau) or tau < 0:
            raise ValueError("tau must be finite and >= 0")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "tau", tau)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def colored(self):
        return self.tau > 0

    def to_dict(self):
        return {"A": self.A.tolist(), "Q": self.Q.tolist(), "tau": self.tau}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["A"], float), np.asarray(d["Q"], float),
                   float(d.get("tau", 0.0)))


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled observation; ``samples`` has shape (count, n)."""

    dt: float
    samples: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        X = np.asarray(self.samples, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not np.all(np.isfinite(X)):
            raise ValueError("time series contains non-finite values")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        X.setflags(write=False)
        object.__setattr__(self, "samples", X)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def n(self):
        return self.samples.shape[1]

    @property
    def times(self):
        return self.start_time + self.dt * np.arange(len(self))

    @property
    def span(self):
        return self.dt * (len(self) - 1)


@dataclass(frozen=True)
class SimConfig:
    """Integrator settings.

    ``burn_in_time=None`` means: 0 for stationary starts, ``20 / |max Re
    lambda(A)|`` when an explicit initial state is given.
    """

    t1: float = 1000.0
    dt: float = 0.001
    subsample_every: int = 10
    burn_in_time: Optional[float] = None
    seed: int = 0
    scheme: str = "heun2"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.subsample_every) < 1:
            raise ValueError("subsample_every must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.burn_in_time is not None and self.burn_in_time < 0:
            raise ValueError("burn_in_time must be >= 0")
        if not self.t1 > (self.burn_in_time or 0.0):
            raise ValueError("t1 must exceed burn_in_time")
        object.__setattr__(self, "subsample_every", int(self.subsample_every))

    @property
    def n_steps(self):
        return int(round(self.t1 / self.dt))


def make_rng(seed, *key):
    """Counter-based (Philox) generator keyed by ``seed`` and integer ``key``.

    Distinct keys give statistically independent streams, so trials can run
    in any order or process and still replay exactly.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *key):
    """Deterministic 64-bit child seed for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def augmented_drift(params):
    """Drift ``[[A, sqrt(2Q)], [0, -I/tau]]`` of the joint (x, eta) system."""
    n, tau = params.n, params.tau
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = params.A
    M[:n, n:] = matrix_sqrt_spd(2.0 * params.Q)
    M[n:, n:] = -np.eye(n) / tau
    return M


def _linear_model(params):
    """Return drift M, noise loading G (dW enters as G dW) and stationary cov."""
    n = params.n
    if params.colored:
        M = augmented_drift(params)
        G = np.zeros((2 * n, n))
        G[n:] = np.eye(n) / params.tau
    else:
        M = params.A
        G = matrix_sqrt_spd(2.0 * params.Q)
    D = G @ G.T
    Sigma = solve_sylvester_like(M, M.T, -D)
    return M, G, 0.5 * (Sigma + Sigma.T)


def _psd_factor(S):
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    return V * np.sqrt(np.clip(lam, 0.0, None))


def step_matrices(M, G, h, scheme):
    """One-step transition ``F`` and noise loading ``L`` (applied to N(0, I)).

    heun2 applies Heun's predictor-corrector to the drift with the same
    Gaussian increment in both stages; for additive noise this gives
    ``F = I + hM + (hM)^2/2`` and ``L = (I + hM/2) G sqrt(h)``.
    exact_exponential uses ``F = exp(Mh)`` and the exact conditional
    covariance ``int_0^h e^{Ms} G G^T e^{M^T s} ds`` (Van Loan).
    """
    d = M.shape[0]
    if scheme == "heun2":
        hM = h * M
        F = np.eye(d) + hM + 0.5 * hM @ hM
        L = (np.eye(d) + 0.5 * hM) @ G * np.sqrt(h)
        return F, L
    if scheme == "exact_exponential":
        blk = np.zeros((2 * d, 2 * d))
        blk[:d, :d] = -M
        blk[:d, d:] = G @ G.T
        blk[d:, d:] = M.T
        E = matrix_exp(blk, h)
        F = E[d:, d:].T
        W = F @ E[:d, d:]
        return F, _psd_factor(W)
    raise ValueError(f"unknown scheme {scheme!r}")


def _default_burn_in(A):
    return 20.0 / abs(np.max(np.linalg.eigvals(A).real))


def _integrate(params, cfg, z0, key):
    M, G, Sigma = _linear_model(params)
    rng = make_rng(cfg.seed, *key)
    if z0 is None:
        z = _psd_factor(Sigma) @ rng.standard_normal(M.shape[0])
        burn = 0.0 if cfg.burn_in_time is None else cfg.burn_in_time
    else:
        z = np.asarray(z0, dtype=float).reshape(M.shape[0])
        burn = _default_burn_in(params.A) if cfg.burn_in_time is None else cfg.burn_in_time
    F, L = step_matrices(M, G, cfg.dt, cfg.scheme)
    every = cfg.subsample_every
    n_steps = cfg.n_steps - cfg.n_steps % every
    if n_steps < every:
        raise InsufficientDataError("t1 too short for a single subsampled step")
    block = max(every, (_BLOCK // every) * every)
    out = [z.copy()]
    done = 0
    while done < n_steps:
        L_blk = min(block, n_steps - done)
        w = rng.standard_normal((L_blk, L.shape[1]))
        kept, z = kernels.linear_recurrence(F, w @ L.T, z, every)
        if not np.all(np.isfinite(z)):
            raise SimulationError(
                f"non-finite state after {done + L_blk} steps; dt={cfg.dt} too large?")
        out.append(kept)
        done += L_blk
    Z = np.vstack([out[0][None, :]] + out[1:])
    return Z, cfg.dt * every, burn


def simulate_white(params, cfg, x0=None, key=()):
    """Simulate ``dx = Ax dt + sqrt(2Q) dW`` and return the subsampled series.

    The initial state is drawn from the stationary law unless ``x0`` is
    given. ``key`` extends the seed, e.g. ``(n, trial)`` in the benchmark.
    """
    if params.colored:
        raise ValueError("simulate_white requires tau == 0")
    Z, Dt, burn = _integrate(params, cfg, x0, key)
    return discard_burn_in(TimeSeries(Dt, Z), burn)


def simulate_colored(params, cfg, z0=None, key=()):
    """Simulate the colored-noise system; returns ``(x, eta)`` series.

    ``z0`` (optional) is the joint initial state ``[x0, eta0]``.
    """
    if not params.colored:
        raise ValueError("simulate_colored requires tau > 0")
    Z, Dt, burn = _integrate(params, cfg, z0, key)
    n = params.n
    x = discard_burn_in(TimeSeries(Dt, Z[:, :n]), burn)
    eta = discard_burn_in(TimeSeries(Dt, Z[:, n:]), burn)
    return x, eta


def simulate(params, cfg, **kw):
    """Dispatch on ``params.tau``; always returns ``(x, eta_or_None)``."""
    if params.colored:
        return simulate_colored(params, cfg, **kw)
    z0 = kw.pop("z0", None)
    return simulate_white(params, cfg, x0=kw.pop("x0", z0), **kw), None


def discard_burn_in(ts, burn_in_time):
    """Drop leading samples with ``t - start_time < burn_in_time``."""
    if burn_in_time <= 0:
        return ts
    # small slack so that burn_in=10, dt=0.01 drops exactly 1000 samples
    k = int(np.ceil(burn_in_time / ts.dt - 1e-9))
    if k >= len(ts) - 1:
        raise InsufficientDataError(
            f"burn-in {burn_in_time} leaves fewer than 2 of {len(ts)} samples")
    return TimeSeries(ts.dt, ts.samples[k:], ts.start_time + k * ts.dt)


def subsample(ts, every):
    """Keep samples 0, every, 2*every, ...; the step becomes ``dt * every``."""
    every = int(every)
    if every < 1:
        raise ValueError("every must be >= 1")
    if every == 1:
        return ts
    return TimeSeries(ts.dt * every, ts.samples[::every], ts.start_time)


# ---------------------------------------------------------------- file formats

def write_csv(path, x, eta=None):
    """Write ``t,x1..xn[,eta1..etan]`` with 17 significant digits."""
    cols = [x.times[:, None], x.samples]
    header = ["t"] + [f"x{i + 1}" for i in range(x.n)]
    if eta is not None:
        cols.append(eta.samples)
        header += [f"eta{i + 1}" for i in range(eta.n)]
    data = np.hstack(cols)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g")


def read_csv(path):
    """Inverse of :func:`write_csv`; returns ``(x, eta_or_None)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    if len(t) < 2:
        raise ValueError(f"{path}: need at least 2 rows")
    dt = float(np.mean(np.diff(t)))
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    ecols = [i for i, h in enumerate(header) if h.startswith("eta")]
    x = TimeSeries(dt, data[:, xcols], t[0])
    eta = TimeSeries(dt, data[:, ecols], t[0]) if ecols else None
    return x, eta


def write_binary(path, ts, seed=None):
    """Little-endian float64 row-major samples plus a ``.json`` sidecar."""
    ts.samples.astype("<f8").tofile(path)
    meta = {"n": ts.n, "dt": ts.dt, "count": len(ts),
            "start_time": ts.start_time, "seed": seed}
    with open(os.fspath(path) + ".json", "w") as fh:
        json.dump(meta, fh)


def read_binary(path):
    with open(os.fspath(path) + ".json") as fh:
        meta = json.load(fh)
    X = np.fromfile(path, dtype="<f8").reshape(meta["count"], meta["n"])
    return TimeSeries(meta["dt"], X, meta.get("start_time", 0.0))
