import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_stable(rng, n, margin=0.1):
    """Gaussian matrix shifted so every eigenvalue has Re <= -margin."""
    A = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(A).real) + margin
    return A - max(shift, 0.0) * np.eye(n)


def random_spd(rng, n, floor=0.2):
    G = rng.standard_normal((n, n))
    return G @ G.T / n + floor * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_BENCH_CACHE = {}


def bench_records(n, t1, tau=0.0, trials=256, **kw):
    """Benchmark records for one dimension, cached for the whole session.

    Trial seeds depend only on (master seed, n, trial index), so a shorter
    run is a prefix of a longer one and is served by slicing.
    """
    from colim.bench import BenchConfig, run_bench
    key = (n, float(t1), float(tau), tuple(sorted(kw.items())))
    have = _BENCH_CACHE.get(key)
    if have is None or len(have) < trials:
        cfg = BenchConfig(dims=(n,), t1=t1, tau=tau, trials=trials, **kw)
        have = run_bench(cfg, workers=1)
        _BENCH_CACHE[key] = have
    return have[:trials]


_REPORT = []


def report_line(line):
    _REPORT.append(line)


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT):
            terminalreporter.write_line(line)
