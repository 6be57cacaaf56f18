import warnings

import pytest


@pytest.fixture(autouse=True)
def _quiet_schedule_overflow():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*overflow.*")
        yield


_VERDICTS = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _VERDICTS.extend(ln for ln in report.capstdout.splitlines()
                         if ln.startswith(("PASS criterion", "FAIL criterion")))


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for ln in _VERDICTS:
            terminalreporter.write_line(ln)
