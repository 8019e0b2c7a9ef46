import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

SUITE_BUDGET_S = 600.0
_criteria: dict = {}
_start = time.time()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, text): acceptance criterion covered by the test")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    key, text = crit
    prev = _criteria.get(key, (text, True, []))
    ok = prev[1] and report.outcome == "passed"
    detail = prev[2] + ([report.nodeid.split("::")[-1]] if report.outcome != "passed" else [])
    _criteria[key] = (prev[0] if key in _criteria else text, ok, detail)


@pytest.fixture(autouse=True)
def _criterion_property(request):
    m = request.node.get_closest_marker("criterion")
    if m is not None:
        request.node.user_properties.append(("criterion", (str(m.args[0]), m.args[1])))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")

    def order(k):
        head = k.split()[0]
        return (int(head) if head.isdigit() else 99, k)

    for key in sorted(_criteria, key=order):
        text, ok, failed = _criteria[key]
        tail = f"  (failing: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {key:<4} {'PASS' if ok else 'FAIL'}  {text}{tail}")
    elapsed = time.time() - _start
    verdict = "PASS" if elapsed < SUITE_BUDGET_S else "FAIL"
    tr.write_line(f"suite runtime {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s): {verdict}")
