"""Acceptance reporting: every test marked ``criterion`` feeds one summary line."""

import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    prev = _RESULTS.get(number)
    ok = rep.passed and (prev is None or prev[1])
    details = [d for d in ((prev[2] if prev else ""), detail) if d]
    _RESULTS[number] = (title, ok, "; ".join(details))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, detail = _RESULTS[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
