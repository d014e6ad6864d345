import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from coupledtl import kernels  # noqa: E402

ACCEPTANCE_TITLES = {
    1: "monotone cost traces",
    2: "closed-form transform update optimality",
    3: "hard thresholding matches exhaustive search",
    4: "least-squares sub-problem exactness",
    5: "decoupling at zero coupling weight",
    6: "synthetic end-to-end identification",
    7: "symmetric round trip",
    8: "greedy consistency and composition",
    9: "CMC properties",
    10: "determinism and round-trip I/O",
}

_outcomes = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = _outcomes.get(crit, "PASS")
    _outcomes[crit] = "FAIL" if failed or prev == "FAIL" else "PASS"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_TITLES):
        status = _outcomes.get(n, "NOT RUN")
        terminalreporter.write_line(f"criterion {n:2d} [{status}] {ACCEPTANCE_TITLES[n]}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    return request.param
