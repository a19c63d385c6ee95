"""Monte Carlo benchmark: random systems, trials, error tables.

A trial generates ``(A, Q)``, simulates, subsamples, runs LIM (``tau == 0``)
or Colored-LIM (``tau > 0``) and records Frobenius relative errors against
the truth. Correlation errors use the exact values from :mod:`colim.oracle`.
"""
import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import List, Sequence

import numpy as np
from scipy.stats import spearmanr

from . import oracle
from .colored import colored_lim_estimate
from .corr import corr_at_lag, estimate_derivatives
from .errors import ColimError
from .lim import lim_estimate
from .sde import SimConfig, SystemParams, derive_seed, make_rng, simulate

log = logging.getLogger(__name__)

DEFAULT_QUANTILES = (5.0, 12.5, 25.0, 50.0, 75.0, 87.5, 95.0)
ERROR_FIELDS = ("e_A", "e_Q", "e_K0", "e_K1", "e_K2", "e_K3")
# rejection cap on the eigenvalue condition for A
MAX_REJECTIONS = 1000
# smallest eigenvalue enforced on Q when the sampled matrix is not definite
Q_EIG_FLOOR = 0.05


def gen_system(n, seed, key=()):
    """Random stable ``A`` and symmetric nonnegative ``Q`` of size ``n``.

    n = 1: ``A ~ U[-1.2, -0.2]``, ``Q ~ U[0.2, 1.2]``.

    n > 1: Gaussian ``A``, redrawn until every eigenvalue has
    ``|Re| > 1e-4``, then reflected into the left half plane by replacing
    each eigenvalue ``g`` with ``-|Re g| + i Im g``. ``Q`` takes uniform
    [0, 1] entries, is mirrored from its upper triangle and made entrywise
    nonnegative. A uniform symmetric matrix is almost never definite for
    n >= 4, so if its smallest eigenvalue is below ``Q_EIG_FLOOR`` the
    diagonal is raised until it equals the floor.

    Returns
    -------
    A, Q : ndarray
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed, *key)
    if n == 1:
        return (np.array([[rng.uniform(-1.2, -0.2)]]),
                np.array([[rng.uniform(0.2, 1.2)]]))
    for _ in range(MAX_REJECTIONS):
        A = rng.standard_normal((n, n))
        w, U = np.linalg.eig(A)
        if np.min(np.abs(w.real)) > 1e-4:
            break
    else:
        raise RuntimeError(f"no admissible A after {MAX_REJECTIONS} draws")
    A = np.real(U @ np.diag(-np.abs(w.real) + 1j * w.imag) @ np.linalg.inv(U))
    Q = rng.uniform(0.0, 1.0, (n, n))
    Q = np.abs(np.triu(Q) + np.triu(Q, 1).T)
    lam_min = np.linalg.eigvalsh(Q)[0]
    if lam_min < Q_EIG_FLOOR:
        Q = Q + (Q_EIG_FLOOR - lam_min) * np.eye(n)
    return A, Q


def rel_error(est, truth):
    """``||est - truth||_F / ||truth||_F``."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {truth.shape}")
    den = np.linalg.norm(truth)
    if den == 0:
        raise ZeroDivisionError("truth has zero norm")
    return float(np.linalg.norm(est - truth) / den)


def _rel_error_or_zero(est, truth):
    # odd derivatives vanish identically in 1-d, both exactly and after projection
    if np.linalg.norm(truth) == 0 and np.linalg.norm(est) == 0:
        return 0.0
    if np.linalg.norm(truth) < 1e-13:
        return float("nan")
    return rel_error(est, truth)


@dataclass(frozen=True)
class BenchConfig:
    dims: Sequence[int] = (1, 2, 3)
    tau: float = 0.0
    t1: float = 1000.0
    trials: int = 1024
    dt: float = 0.001
    subsample_every: int = 10
    stencil_order: int = 2
    rho_lag: float = 0.5
    seed: int = 0
    q_method: str = "auto"
    scheme: str = "heun2"
    quantiles: Sequence[float] = DEFAULT_QUANTILES

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        q = list(self.quantiles)
        if not all(0 < a < 100 for a in q) or any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("quantiles must be strictly increasing within (0, 100)")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "quantiles", tuple(float(a) for a in q))

    @property
    def obs_dt(self):
        return self.dt * self.subsample_every

    @property
    def lag_index(self):
        return max(1, int(round(self.rho_lag / self.obs_dt)))

    def to_dict(self):
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["quantiles"] = list(self.quantiles)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown BenchConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class BenchRecord:
    n: int
    trial: int
    seed: int
    e_A: float = float("nan")
    e_Q: float = float("nan")
    e_K0: float = float("nan")
    e_K1: float = float("nan")
    e_K2: float = float("nan")
    e_K3: float = float("nan")
    cond_A: float = float("nan")
    cond_Q: float = float("nan")
    min_re: float = float("nan")
    min_im: float = float("nan")
    warnings: List[str] = field(default_factory=list)
    failed: bool = False

    CSV_FIELDS = ("n", "trial", "seed", "e_A", "e_Q", "e_K0", "e_K1", "e_K2",
                  "e_K3", "cond_A", "cond_Q", "min_re", "min_im", "warnings")

    def csv_row(self):
        row = [self.n, self.trial, self.seed]
        row += [_fmt(getattr(self, k)) for k in self.CSV_FIELDS[3:-1]]
        row.append(";".join(self.warnings))
        return row


def _fmt(x):
    return f"{x:.17g}"


def run_trial(cfg, n, trial_index):
    """One trial; never raises for numerical trouble, marks the record instead.

    NaN in an error field means either failure (``failed`` set, reason in
    ``warnings``) or not applicable (white mode has no derivative errors).
    """
    seed = derive_seed(cfg.seed, n, trial_index)
    rec = BenchRecord(n=n, trial=trial_index, seed=seed)
    try:
        A, Q = gen_system(n, seed, key=(0,))
        lam = np.linalg.eigvals(A)
        rec.min_re = float(np.min(np.abs(lam.real)))
        rec.min_im = float(np.min(np.abs(lam.imag)))
        params = SystemParams(A, Q, cfg.tau)
        sim_cfg = SimConfig(t1=cfg.t1, dt=cfg.dt, subsample_every=cfg.subsample_every,
                            seed=seed, scheme=cfg.scheme)
        x, _ = simulate(params, sim_cfg, key=(1,))
        aug = oracle.build(params)
        if params.colored:
            rep = colored_lim_estimate(x, cfg.tau, cfg.q_method, cfg.stencil_order)
            A_hat, Q_hat = rep.A_hat, rep.Q_hat
            rec.cond_A, rec.cond_Q = rep.cond_A, rep.cond_Q
            rec.warnings.extend(rep.warnings)
            est = estimate_derivatives(x, cfg.stencil_order)
            truth = oracle.analytic_derivs(aug)
            for m in range(4):
                setattr(rec, f"e_K{m}",
                        _rel_error_or_zero(est.derivative(m), truth.derivative(m)))
        else:
            res = lim_estimate(x, cfg.lag_index)
            A_hat, Q_hat = res.A_hat, res.Q_hat
            rec.warnings.extend(res.warnings)
            rec.e_K0 = rel_error(corr_at_lag(x, 0), aug.C_xx)
        rec.e_A = rel_error(A_hat, A)
        rec.e_Q = rel_error(Q_hat, Q)
    except (ColimError, np.linalg.LinAlgError, ValueError, RuntimeError) as exc:
        rec.failed = True
        rec.warnings.append(f"failed: {type(exc).__name__}: {exc}")
    return rec


def _run_one(args):
    return run_trial(*args)


def run_bench(cfg, workers=None, progress=False):
    """All trials for every dimension, ordered by ``(n, trial)``.

    Results do not depend on ``workers``: each trial seeds itself from
    ``(cfg.seed, n, trial)``.
    """
    jobs = [(cfg, n, t) for n in cfg.dims for t in range(cfg.trials)]
    if workers is None:
        workers = default_workers()
    out = []
    if workers <= 1:
        it = map(_run_one, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        it = pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (8 * workers)))
    try:
        for i, rec in enumerate(it, 1):
            out.append(rec)
            if progress and (i % 16 == 0 or i == len(jobs)):
                print(f"\r{i}/{len(jobs)} trials", end="", file=progress, flush=True)
    finally:
        if workers > 1:
            pool.shutdown()
    if progress:
        print(file=progress)
    return out


def default_workers():
    env = os.environ.get("COLIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def percentile_table(records, quantiles=DEFAULT_QUANTILES, error_fields=ERROR_FIELDS):
    """Per-dimension percentiles (linear interpolation) of each error field.

    Returns a list of dicts ``{"n", "field", "values": [...], "count"}``;
    cells without a finite value carry ``values = None``.
    """
    rows = []
    dims = sorted({r.n for r in records})
    for n in dims:
        for f in error_fields:
            vals = np.array([getattr(r, f) for r in records if r.n == n and not r.failed])
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                rows.append({"n": n, "field": f, "values": None, "count": 0})
                continue
            q = np.percentile(vals, quantiles, method="linear")
            rows.append({"n": n, "field": f, "values": q.tolist(), "count": int(vals.size)})
    return rows


def median(records, n, fieldname):
    vals = np.array([getattr(r, fieldname) for r in records if r.n == n and not r.failed])
    vals = vals[np.isfinite(vals)]
    return float(np.median(vals)) if vals.size else float("nan")


def diagnostics_export(records):
    """Rows ``(n, trial, min_re, min_im, e_K, e_Q)`` for scatter plots."""
    return [{"n": r.n, "trial": r.trial, "min_re": r.min_re, "min_im": r.min_im,
             "e_K": r.e_K0, "e_Q": r.e_Q, "failed": r.failed} for r in records]


def threshold_counts(records, e_k_thresh=0.15, cond_thresh=20.0, e_q_thresh=0.15):
    """Per dimension: how many trials have ``e_K >= 15%`` or ``cond_Q > 20``,
    and how many of those end with ``e_Q >= 15%``."""
    out = []
    for n in sorted({r.n for r in records}):
        rs = [r for r in records if r.n == n and not r.failed]
        hit_k = [r for r in rs if r.e_K0 >= e_k_thresh]
        hit_c = [r for r in rs if r.cond_Q > cond_thresh]
        out.append({
            "n": n,
            "trials": len(rs),
            "e_K_high": len(hit_k),
            "e_K_high_and_e_Q_high": sum(r.e_Q >= e_q_thresh for r in hit_k),
            "cond_Q_high": len(hit_c),
            "cond_Q_high_and_e_Q_high": sum(r.e_Q >= e_q_thresh for r in hit_c),
        })
    return out


def rank_correlation(records, xfield="min_re", yfield="e_K0", dims=None):
    rs = [r for r in records if not r.failed and (dims is None or r.n in dims)]
    x = np.array([getattr(r, xfield) for r in rs])
    y = np.array([getattr(r, yfield) for r in rs])
    ok = np.isfinite(x) & np.isfinite(y)
    return float(spearmanr(x[ok], y[ok]).statistic)


# --------------------------------------------------------------------- output

def _quantile_label(q):
    return "p" + f"{q:g}".replace(".", "_")


def write_records_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BenchRecord.CSV_FIELDS)
        for r in records:
            w.writerow(r.csv_row())


def read_records_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            warnings = [w for w in row["warnings"].split(";") if w]
            rec = BenchRecord(
                n=int(row["n"]), trial=int(row["trial"]), seed=int(row["seed"]),
                **{k: float(row[k]) for k in BenchRecord.CSV_FIELDS[3:-1]},
                warnings=warnings,
                failed=any(w.startswith("failed") for w in warnings))
            out.append(rec)
    return out


def write_table_csv(path, table, quantiles=DEFAULT_QUANTILES):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "field"] + [_quantile_label(q) for q in quantiles])
        for row in table:
            vals = row["values"]
            cells = ["missing"] * len(quantiles) if vals is None else [_fmt(v) for v in vals]
            w.writerow([row["n"], row["field"]] + cells)


def write_diagnostics_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "trial", "min_re", "min_im", "e_K", "e_Q", "failed"])
        for r in rows:
            w.writerow([r["n"], r["trial"], _fmt(r["min_re"]), _fmt(r["min_im"]),
                        _fmt(r["e_K"]), _fmt(r["e_Q"]), int(r["failed"])])


def format_table(table, fields_=("e_A", "e_Q"), scale=100.0):
    """Plain-text ``e_A/e_Q`` percentile table, values in percent."""
    by = {(r["n"], r["field"]): r["values"] for r in table}
    dims = sorted({r["n"] for r in table})
    lines = []
    for n in dims:
        cols = []
        vals = [by.get((n, f)) for f in fields_]
        if any(v is None for v in vals):
            lines.append(f"{n:>3}  missing")
            continue
        for i in range(len(vals[0])):
            cols.append("/".join(f"{v[i] * scale:.1f}" for v in vals))
        lines.append(f"{n:>3}  " + "  ".join(cols))
    return "\n".join(lines)


def load_config(path, overrides=None):
    with open(path) as fh:
        d = json.load(fh)
    if overrides:
        d.update({k: v for k, v in overrides.items() if v is not None})
    return BenchConfig.from_dict(d)
