from collections import OrderedDict

import pytest

_CRITERIA = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    entry = _CRITERIA.setdefault(n, {"text": text, "failed": [], "ran": 0})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry["ran"] += 1
        if rep.failed:
            entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "FAIL" if e["failed"] else ("PASS" if e["ran"] else "SKIP")
        line = f"[{status}] criterion {n}: {e['text']}"
        if e["failed"]:
            line += f"  (failed: {', '.join(e['failed'])})"
        tr.write_line(line)
