import re

import pytest

_ACCEPTANCE: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    match = re.match(r"test_criterion_(\d+)", item.name)
    if match:
        _ACCEPTANCE[match.group(1)] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_ACCEPTANCE, key=int):
        status = "PASS" if _ACCEPTANCE[num] == "PASSED" else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {status}")
