import pytest


# one summary line per acceptance criterion, derived from the test outcome
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    prev = _CRITERIA.get(number, (title, "PASS"))[1]
    if rep.failed:
        status = "FAIL"
    elif rep.skipped and rep.when in ("setup", "call"):
        status = "SKIP" if prev != "FAIL" else prev
    else:
        status = prev
    _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")
