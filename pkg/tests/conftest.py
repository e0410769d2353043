import time
import warnings

import numpy as np
import pytest

from penaltystop.penalty_solver import PenaltyConfig
from penaltystop.reference import BrownianExample, build_brownian_problem

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end runs taking about a minute")
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    warnings.filterwarnings("ignore", message="The TBB threading layer")


def pytest_runtest_logreport(report):
    num, title = getattr(report, "criterion", (None, None))
    if num is None:
        return
    ok = report.passed if report.when == "call" else not report.failed
    prev = _criteria.get(num, (title, True))
    _criteria[num] = (title, prev[1] and ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        title, ok = _criteria[num]
        terminalreporter.write_line(f"criterion {num:<4} {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(scope="session")
def brownian_levels():
    """Large-beta sweeps of the Brownian benchmark at two grid levels, with timings."""
    ex = BrownianExample(alpha=0.25, x_left=-8.0)
    cfg = PenaltyConfig(tol=1e-10)
    out = {}
    for dx in (0.02, 0.01):
        t0 = time.perf_counter()
        problem = build_brownian_problem(ex, dx)
        sweep = problem.sweep(cfg)
        out[dx] = (problem, sweep, time.perf_counter() - t0)
    return ex, cfg, out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
