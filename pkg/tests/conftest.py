import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or rep.failed or rep.skipped:
        prev = _results.get(num)
        if prev is None or prev[1] == "PASS":
            status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
            _results[num] = (title, status, getattr(rep, "duration", 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        title, status, secs = _results[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {title}  ({secs:.1f}s)")
