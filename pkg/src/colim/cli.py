"""Command-line front end.

    colim <subcommand> [--config PATH] [--seed N] [--out PATH | --out-dir DIR] [flags]

Every flag has a config-file key of the same name (dashes become
underscores); flags win over file values and unknown keys are rejected.
Exit status: 0 success, 1 usage error, 2 numerical failure.
"""
import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import bench, oracle
from .colored import Q_METHODS, colored_lim_estimate
from .errors import ColimError
from .lim import DEFAULT_RHO, lim_estimate, lim_sweep, sweep_from_lagged, sweep_rows
from .sde import SCHEMES, SimConfig, SystemParams, read_csv, simulate, write_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ------------------------------------------------------------------ file output

def atomic_write(path, write):
    """Call ``write(tmp_path)`` then rename onto ``path``."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, obj):
    def w(tmp):
        with open(tmp, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    atomic_write(path, w)


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _write_rows_csv(path, rows, columns):
    def w(tmp):
        with open(tmp, "w") as fh:
            fh.write(",".join(columns) + "\n")
            for r in rows:
                cells = []
                for c in columns:
                    v = r.get(c, "")
                    cells.append(f"{v:.17g}" if isinstance(v, (float, np.floating)) else str(v))
                fh.write(",".join(cells) + "\n")
    atomic_write(path, w)


# --------------------------------------------------------------- option tables

# (flag, config key, type, help); type None means a store_true switch
COMMON = [
    ("--seed", "seed", int, "master seed"),
]

SUBCOMMANDS = {
    "simulate": {
        "help": "simulate a trajectory to CSV",
        "io": ("config_required", "out"),
        "flags": [
            ("--tau", "tau", float, "noise correlation time (0 = white)"),
            ("--t1", "t1", float, "end time"),
            ("--dt", "dt", float, "integrator step"),
            ("--subsample-every", "subsample_every", int, "keep every k-th step"),
            ("--burn-in-time", "burn_in_time", float, "discarded initial span"),
            ("--scheme", "scheme", str, f"one of {SCHEMES}"),
        ],
        "extra_keys": {"A", "Q"},
    },
    "estimate-lim": {
        "help": "classical LIM on a trajectory CSV",
        "io": ("in", "out"),
        "flags": [
            ("--rho", "rho", float, f"time lag (default {DEFAULT_RHO})"),
            ("--k", "k", int, "lag index; overrides rho"),
            ("--no-demean", "no_demean", None, "keep the sample mean"),
        ],
    },
    "estimate-colored": {
        "help": "Colored-LIM on a trajectory CSV",
        "io": ("in", "out"),
        "flags": [
            ("--tau", "tau", float, "noise correlation time (required)"),
            ("--q-method", "q_method", str, f"auto or one of {Q_METHODS}"),
            ("--stencil-order", "stencil_order", int, "2 or 4"),
            ("--cond-threshold", "cond_threshold", float, "cond_Q warning level"),
            ("--no-eq3", "no_eq3", None, "use the second-derivative identity only"),
            ("--no-demean", "no_demean", None, "keep the sample mean"),
        ],
    },
    "oracle": {
        "help": "exact correlations, derivatives and diffusion for a system",
        "io": ("config_required", "out"),
        "flags": [
            ("--tau", "tau", float, "noise correlation time"),
            ("--dt", "dt", float, "lag spacing for K(k dt)"),
            ("--max-lag", "max_lag", int, "largest lag index"),
        ],
        "extra_keys": {"A", "Q"},
    },
    "bench": {
        "help": "Monte Carlo benchmark",
        "io": ("config", "out_dir"),
        "flags": [
            ("--dims", "dims", str, "comma separated dimensions"),
            ("--tau", "tau", float, "0 runs LIM, > 0 Colored-LIM"),
            ("--t1", "t1", float, "simulated span"),
            ("--trials", "trials", int, "trials per dimension"),
            ("--dt", "dt", float, "integrator step"),
            ("--subsample-every", "subsample_every", int, "observation stride"),
            ("--stencil-order", "stencil_order", int, "2 or 4"),
            ("--rho-lag", "rho_lag", float, "LIM time lag"),
            ("--q-method", "q_method", str, "auto, fdr or kprime"),
            ("--scheme", "scheme", str, f"one of {SCHEMES}"),
            ("--workers", "workers", int, "process count"),
        ],
        "extra_keys": {"quantiles"},
    },
    "sweep": {
        "help": "LIM over a range of lags (trajectory CSV or analytic system)",
        "io": ("in_or_config", "out"),
        "flags": [
            ("--k-min", "k_min", int, "first lag index"),
            ("--k-max", "k_max", int, "last lag index"),
            ("--tau", "tau", float, "noise correlation time (analytic mode)"),
            ("--dt", "dt", float, "lag spacing (analytic mode)"),
        ],
        "extra_keys": {"A", "Q"},
    },
}


def build_parser():
    p = _Parser(prog="colim", description="Linear inverse models for white and colored noise.")
    sub = p.add_subparsers(dest="subcommand", metavar="<subcommand>", parser_class=_Parser)
    for name, spec in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=spec["help"])
        sp.add_argument("--config", dest="config", default=None, metavar="PATH")
        io = spec["io"]
        if "in" in io or "in_or_config" in io:
            sp.add_argument("--in", dest="in_", default=None, metavar="PATH")
        if "out" in io:
            sp.add_argument("--out", default=None, metavar="PATH")
        if "out_dir" in io:
            sp.add_argument("--out-dir", dest="out_dir", default=None, metavar="DIR")
        for flag, key, typ, hlp in COMMON + spec["flags"]:
            if typ is None:
                sp.add_argument(flag, dest=key, action="store_const", const=True,
                                default=None, help=hlp)
            else:
                sp.add_argument(flag, dest=key, type=typ, default=None, help=hlp)
    return p


def _allowed_keys(name):
    spec = SUBCOMMANDS[name]
    keys = {k for _, k, _, _ in COMMON + spec["flags"]} | spec.get("extra_keys", set())
    io = spec["io"]
    if "in" in io or "in_or_config" in io:
        keys.add("in")
    if "out" in io:
        keys.add("out")
    if "out_dir" in io:
        keys.add("out_dir")
    return keys


def merge_options(name, args):
    """Config-file values overlaid by explicit flags; unknown keys are errors."""
    opts = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                opts = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(opts, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(opts) - _allowed_keys(name)
        if unknown:
            raise UsageError(f"unknown config keys for {name}: {sorted(unknown)}")
    flags = vars(args).copy()
    if flags.pop("in_", None) is not None:
        flags["in"] = args.in_
    for k in ("subcommand", "config"):
        flags.pop(k, None)
    given = {k: v for k, v in flags.items() if v is not None}
    opts.update(given)
    return opts, set(given)


def _require(opts, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))


def _check_out(path):
    d = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(d):
        raise UsageError(f"output directory does not exist: {d}")


def _check_in(path):
    if not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")


def _system(opts):
    _require(opts, "A", "Q")
    try:
        return SystemParams(np.atleast_2d(np.asarray(opts["A"], float)),
                            np.atleast_2d(np.asarray(opts["Q"], float)),
                            float(opts.get("tau", 0.0)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ColimError):
            raise
        raise UsageError(f"invalid system: {exc}")


# ---------------------------------------------------------------- subcommands

def cmd_simulate(opts):
    _require(opts, "out")
    _check_out(opts["out"])
    params = _system(opts)
    sim_keys = ("t1", "dt", "subsample_every", "burn_in_time", "seed", "scheme")
    try:
        cfg = SimConfig(**{k: opts[k] for k in sim_keys if k in opts})
    except ValueError as exc:
        raise UsageError(str(exc))
    x, eta = simulate(params, cfg)
    atomic_write(opts["out"], lambda tmp: write_csv(tmp, x, eta))


def cmd_estimate_lim(opts):
    _require(opts, "in", "out")
    _check_in(opts["in"])
    _check_out(opts["out"])
    x, _ = read_csv(opts["in"])
    if opts.get("k") is not None:
        k = int(opts["k"])
    else:
        k = max(1, int(round(float(opts.get("rho", DEFAULT_RHO)) / x.dt)))
    res = lim_estimate(x, k, demean=not opts.get("no_demean", False))
    _write_json(opts["out"], res.to_dict())


def cmd_estimate_colored(opts):
    _require(opts, "in", "out", "tau")
    _check_in(opts["in"])
    _check_out(opts["out"])
    if not float(opts["tau"]) > 0:
        raise UsageError("--tau must be positive")
    x, _ = read_csv(opts["in"])
    rep = colored_lim_estimate(
        x, float(opts["tau"]), opts.get("q_method", "auto"),
        int(opts.get("stencil_order", 2)), not opts.get("no_demean", False),
        not opts.get("no_eq3", False), float(opts.get("cond_threshold", 20.0)))
    _write_json(opts["out"], rep.to_dict())


def cmd_oracle(opts):
    _require(opts, "out")
    _check_out(opts["out"])
    params = _system(opts)
    _write_json(opts["out"], oracle.oracle_dump(params, float(opts.get("dt", 0.01)),
                                                int(opts.get("max_lag", 3))))


def cmd_sweep(opts):
    _require(opts, "out", "k_min", "k_max")
    _check_out(opts["out"])
    k_min, k_max = int(opts["k_min"]), int(opts["k_max"])
    if opts.get("in") is not None:
        _check_in(opts["in"])
        x, _ = read_csv(opts["in"])
        entries = lim_sweep(x, k_min, k_max)
    else:
        params = _system(opts)
        dt = float(opts.get("dt", 0.01))
        if k_min < 1 or k_max < k_min:
            raise UsageError("need 1 <= k_min <= k_max")
        aug = oracle.build(params)
        lagged = oracle.analytic_lagged(aug, dt, range(k_min, k_max + 1))
        entries = sweep_from_lagged(aug.C_xx, lagged, dt)
    rows = sweep_rows(entries)
    cols = ["rho"]
    for r in rows:
        cols += [c for c in r if c not in cols and c != "error"]
    _write_rows_csv(opts["out"], rows, cols + ["error"])


def cmd_bench(opts, workers_from_flag=False):
    """Worker count: ``--workers`` flag, then ``COLIM_THREADS``, then the
    config file, then the CPU count. Results do not depend on it."""
    _require(opts, "out_dir")
    out_dir = opts["out_dir"]
    if not os.path.isdir(out_dir):
        parent = os.path.dirname(os.path.abspath(out_dir))
        if not os.path.isdir(parent):
            raise UsageError(f"parent of --out-dir does not exist: {parent}")
        os.makedirs(out_dir, exist_ok=True)
    workers = opts.pop("workers", None)
    if os.environ.get("COLIM_THREADS") and not workers_from_flag:
        workers = bench.default_workers()
    opts.pop("out_dir")
    if isinstance(opts.get("dims"), str):
        try:
            opts["dims"] = [int(d) for d in opts["dims"].split(",") if d.strip()]
        except ValueError:
            raise UsageError("--dims must be comma separated integers")
    try:
        cfg = bench.BenchConfig.from_dict(opts)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))
    records = bench.run_bench(cfg, workers=workers or bench.default_workers(),
                              progress=sys.stderr)
    table = bench.percentile_table(records, cfg.quantiles)
    atomic_write(os.path.join(out_dir, "records.csv"),
                 lambda tmp: bench.write_records_csv(tmp, records))
    atomic_write(os.path.join(out_dir, "table.csv"),
                 lambda tmp: bench.write_table_csv(tmp, table, cfg.quantiles))
    atomic_write(os.path.join(out_dir, "diagnostics.csv"),
                 lambda tmp: bench.write_diagnostics_csv(tmp, bench.diagnostics_export(records)))
    summary = {
        "config": cfg.to_dict(),
        "failed": sum(r.failed for r in records),
        "thresholds": bench.threshold_counts(records),
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    print(bench.format_table(table), file=sys.stderr)


HANDLERS = {
    "simulate": cmd_simulate,
    "estimate-lim": cmd_estimate_lim,
    "estimate-colored": cmd_estimate_colored,
    "oracle": cmd_oracle,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            raise UsageError(parser.format_help())
        opts, from_flags = merge_options(args.subcommand, args)
        if args.subcommand == "bench":
            cmd_bench(opts, "workers" in from_flags)
        else:
            HANDLERS[args.subcommand](opts)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (ColimError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
